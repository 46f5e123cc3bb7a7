//! Synthetic corpora: rendered glyph-pattern text lines for training runs,
//! and label sets with engineered statistics for the corpus reports.

use std::io;
use std::path::{Path, PathBuf};

use crate::dataset::{write_annotations, Sample};
use crate::imaging::{save_image, ImageBuffer, ImageError};
use crate::rng::Rng;

/// Forty-symbol alphabet for glyph corpora.
pub const GLYPH_ALPHABET: &str = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ#+-=";

pub const GLYPH_ROWS: usize = 7;
pub const GLYPH_COLS: usize = 5;
pub const MIN_GLYPH_DISTANCE: usize = 8;

fn distance(a: &[[bool; GLYPH_COLS]; GLYPH_ROWS], b: &[[bool; GLYPH_COLS]; GLYPH_ROWS]) -> usize {
    a.iter().flatten().zip(b.iter().flatten()).filter(|(x, y)| x != y).count()
}

/// A random 5×7 bitmap per character. Every column has a lit pixel, so
/// glyph widths are fixed, and any two bitmaps differ in at least
/// [`MIN_GLYPH_DISTANCE`] pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphFont {
    chars: Vec<char>,
    bitmaps: Vec<[[bool; GLYPH_COLS]; GLYPH_ROWS]>,
}

impl GlyphFont {
    pub fn random(chars: &str, seed: u64) -> Self {
        let mut rng = Rng::stream(seed, &[0x6f17]);
        let chars: Vec<char> = chars.chars().collect();
        let mut bitmaps: Vec<[[bool; GLYPH_COLS]; GLYPH_ROWS]> = Vec::with_capacity(chars.len());
        while bitmaps.len() < chars.len() {
            let mut b = [[false; GLYPH_COLS]; GLYPH_ROWS];
            for row in b.iter_mut() {
                for px in row.iter_mut() {
                    *px = rng.bernoulli(0.4);
                }
            }
            let full_columns = (0..GLYPH_COLS).all(|x| (0..GLYPH_ROWS).any(|y| b[y][x]));
            if full_columns && bitmaps.iter().all(|o| distance(o, &b) >= MIN_GLYPH_DISTANCE) {
                bitmaps.push(b);
            }
        }
        Self { chars, bitmaps }
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn glyph(&self, c: char) -> Option<&[[bool; GLYPH_COLS]; GLYPH_ROWS]> {
        self.chars.iter().position(|&k| k == c).map(|i| &self.bitmaps[i])
    }

    /// Renders a single-line gray image. Spaces and unknown characters
    /// render as empty cells.
    pub fn render(&self, text: &str, style: &RenderStyle) -> ImageBuffer {
        let s = style.scale.max(1);
        let cell = GLYPH_COLS * s + style.gap;
        let n = text.chars().count().max(1);
        let width = 2 * style.margin_x + n * cell - style.gap;
        let height = 2 * style.margin_y + GLYPH_ROWS * s;
        let mut img = ImageBuffer::filled(height, width, 1, style.background);
        for (i, c) in text.chars().enumerate() {
            let Some(g) = self.glyph(c) else { continue };
            let x0 = style.margin_x + i * cell;
            for (gy, row) in g.iter().enumerate() {
                for (gx, &on) in row.iter().enumerate() {
                    if !on {
                        continue;
                    }
                    for dy in 0..s {
                        for dx in 0..s {
                            img.set(style.margin_y + gy * s + dy, x0 + gx * s + dx, 0, style.foreground);
                        }
                    }
                }
            }
        }
        img
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenderStyle {
    /// Pixels per glyph cell.
    pub scale: usize,
    /// Blank pixel columns between glyphs.
    pub gap: usize,
    pub margin_x: usize,
    pub margin_y: usize,
    pub foreground: u8,
    pub background: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlyphCorpusConfig {
    pub samples: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub scales: (usize, usize),
    /// Chance of a space between two neighbouring characters.
    pub space_prob: f64,
    pub seed: u64,
}

impl Default for GlyphCorpusConfig {
    fn default() -> Self {
        Self {
            samples: 500,
            min_len: 3,
            max_len: 10,
            scales: (3, 5),
            space_prob: 0.05,
            seed: 7,
        }
    }
}

/// `(label, image)` pairs drawn from a fixed random font over
/// [`GLYPH_ALPHABET`]. Labels may contain spaces.
pub fn glyph_corpus(cfg: &GlyphCorpusConfig) -> Vec<(String, ImageBuffer)> {
    let font = GlyphFont::random(GLYPH_ALPHABET, cfg.seed);
    let chars = font.chars().to_vec();
    let mut rng = Rng::stream(cfg.seed, &[0xc0a9]);
    (0..cfg.samples)
        .map(|_| {
            let len = rng.int_inclusive(cfg.min_len, cfg.max_len);
            let mut label = String::new();
            for i in 0..len {
                if i > 0 && rng.bernoulli(cfg.space_prob) {
                    label.push(' ');
                }
                label.push(chars[rng.int_inclusive(0, chars.len() - 1)]);
            }
            let background = rng.int_inclusive(160, 240) as u8;
            let scale = rng.int_inclusive(cfg.scales.0, cfg.scales.1);
            let style = RenderStyle {
                scale,
                gap: rng.int_inclusive(1, 2) * scale,
                margin_x: rng.int_inclusive(2, 8),
                margin_y: rng.int_inclusive(2, 6),
                foreground: rng.int_inclusive(0, 90) as u8,
                background,
            };
            let img = font.render(&label, &style);
            (label, img)
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes images as `img/NNNNN.pgm` under `dir` plus an annotation file;
/// returns the annotation path.
pub fn write_corpus(dir: &Path, items: &[(String, ImageBuffer)], annotations: &str) -> Result<PathBuf, SynthError> {
    std::fs::create_dir_all(dir.join("img"))?;
    let mut samples = Vec::with_capacity(items.len());
    for (i, (label, img)) in items.iter().enumerate() {
        let rel = format!("img/{i:05}.pgm");
        save_image(img, &dir.join(&rel))?;
        samples.push(Sample::new(rel, label.clone()));
    }
    let path = dir.join(annotations);
    write_annotations(&path, &samples)?;
    Ok(path)
}

/// Bucket sizes (singletons, 2–10, 11–100, 101–1000, 1001+) of the
/// engineered statistics fixture.
pub const FIXTURE_BUCKETS: [usize; 5] = [655, 1138, 1246, 783, 86];
pub const FIXTURE_DISTINCT: usize = 3908;
pub const FIXTURE_MAX_LEN: usize = 24;

const BUCKET_RANGES: [(usize, usize); 5] = [(1, 1), (2, 10), (11, 100), (101, 1000), (1001, 1500)];

/// Labels whose character frequencies fill [`FIXTURE_BUCKETS`] exactly,
/// with lengths in `1..=24` and at least one label of length 24.
pub fn frequency_fixture_labels(seed: u64) -> Vec<String> {
    let mut rng = Rng::stream(seed, &[0xf1c5]);
    let mut pool: Vec<char> = Vec::new();
    let mut code = 0x4e00u32;
    for (count, &(lo, hi)) in FIXTURE_BUCKETS.iter().zip(&BUCKET_RANGES) {
        for _ in 0..*count {
            let c = char::from_u32(code).expect("CJK block is contiguous");
            code += 1;
            let occurrences = rng.int_inclusive(lo, hi);
            pool.extend(std::iter::repeat_n(c, occurrences));
        }
    }
    rng.shuffle(&mut pool);
    chunk_labels(&pool, &mut rng)
}

/// Cuts a character stream into labels of length `1..=24`, the first
/// being exactly 24 long when the stream allows it.
fn chunk_labels(pool: &[char], rng: &mut Rng) -> Vec<String> {
    let mut labels = Vec::new();
    let mut i = 0;
    while i < pool.len() {
        let len = if labels.is_empty() {
            FIXTURE_MAX_LEN
        } else {
            rng.int_inclusive(1, FIXTURE_MAX_LEN)
        };
        let end = (i + len).min(pool.len());
        labels.push(pool[i..end].iter().collect());
        i = end;
    }
    labels
}

/// Labels with a known length distribution: `counts[k]` labels of length
/// `k + 1`, drawn from a small alphabet and shuffled.
pub fn length_fixture_labels(counts: &[usize], seed: u64) -> Vec<String> {
    let mut rng = Rng::stream(seed, &[0x1e46]);
    let alphabet: Vec<char> = GLYPH_ALPHABET.chars().collect();
    let mut labels = Vec::new();
    for (k, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            labels.push((0..=k).map(|_| alphabet[rng.int_inclusive(0, alphabet.len() - 1)]).collect());
        }
    }
    rng.shuffle(&mut labels);
    labels
}
