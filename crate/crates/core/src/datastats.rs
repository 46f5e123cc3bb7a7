//! Corpus analysis: train/val split, distinct characters, frequency
//! buckets, label lengths and image geometry, written as JSON, CSV and SVG.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charset::strip_spaces;
use crate::dataset::{write_annotations, Sample};
use crate::imaging::load_image;
use crate::rng::Rng;
use crate::svg;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 samples to split, found {0}")]
    TooFewToSplit(usize),
    #[error("split ratio {0} outside (0, 1)")]
    BadRatio(f64),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("audit sample of {requested} exceeds corpus of {available}")]
    AuditTooLarge { requested: usize, available: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StatsError + '_ {
    move |source| StatsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Seeded shuffle, then the first `round(ratio · N)` items go to train.
pub fn split_train_val<T: Clone>(samples: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewToSplit(samples.len()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(StatsError::BadRatio(ratio));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    Rng::stream(seed, &[0x5b11]).shuffle(&mut order);
    let n_train = (ratio * samples.len() as f64).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Occurrences per non-space character.
pub fn char_counts<'a, I: IntoIterator<Item = &'a str>>(labels: I) -> BTreeMap<char, usize> {
    let mut counts = BTreeMap::new();
    for l in labels {
        for c in l.chars().filter(|&c| c != ' ') {
            *counts.entry(c).or_default() += 1;
        }
    }
    counts
}

/// Distinct characters by occurrence count: exactly once, 2–10, 11–100,
/// 101–1000 and more than 1000.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyBuckets {
    pub once: usize,
    pub from_2_to_10: usize,
    pub from_11_to_100: usize,
    pub from_101_to_1000: usize,
    pub over_1000: usize,
    pub total: usize,
}

impl FrequencyBuckets {
    pub const LABELS: [&'static str; 5] = ["1", "2-10", "11-100", "101-1000", "1001+"];

    pub fn from_counts(counts: &BTreeMap<char, usize>) -> Self {
        let mut b = Self::default();
        for &n in counts.values() {
            match n {
                0 => continue,
                1 => b.once += 1,
                2..=10 => b.from_2_to_10 += 1,
                11..=100 => b.from_11_to_100 += 1,
                101..=1000 => b.from_101_to_1000 += 1,
                _ => b.over_1000 += 1,
            }
            b.total += 1;
        }
        b
    }

    /// Bucket counts in [`Self::LABELS`] order.
    pub fn counts(&self) -> [usize; 5] {
        [
            self.once,
            self.from_2_to_10,
            self.from_11_to_100,
            self.from_101_to_1000,
            self.over_1000,
        ]
    }
}

pub fn char_frequency_report<'a, I: IntoIterator<Item = &'a str>>(labels: I) -> Result<FrequencyBuckets, StatsError> {
    let mut any = false;
    let counts = char_counts(labels.into_iter().inspect(|_| any = true));
    if !any {
        return Err(StatsError::EmptyCorpus);
    }
    Ok(FrequencyBuckets::from_counts(&counts))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    /// Space-stripped length to label count.
    pub counts: BTreeMap<usize, usize>,
    pub max: usize,
    pub samples: usize,
}

pub fn length_histogram<'a, I: IntoIterator<Item = &'a str>>(labels: I) -> LengthHistogram {
    let mut h = LengthHistogram::default();
    for l in labels {
        let n = strip_spaces(l).chars().count();
        *h.counts.entry(n).or_default() += 1;
        h.max = h.max.max(n);
        h.samples += 1;
    }
    h
}

pub const HEIGHT_THRESHOLDS: [usize; 3] = [32, 48, 64];

/// Fractions of heights strictly above 32, 48 and 64 pixels.
pub fn height_fractions(heights: &[usize]) -> [f64; 3] {
    if heights.is_empty() {
        return [0.0; 3];
    }
    HEIGHT_THRESHOLDS.map(|t| heights.iter().filter(|&&h| h > t).count() as f64 / heights.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub path: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unreadable {
    pub path: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub sizes: Vec<ImageSize>,
    pub above_32: f64,
    pub above_48: f64,
    pub above_64: f64,
    pub unreadable: Vec<Unreadable>,
}

/// Reads every image (in parallel) and records its size. Results follow
/// annotation order; unreadable images are listed and excluded.
pub fn image_geometry_report(samples: &[Sample]) -> GeometryReport {
    let loaded: Vec<_> = samples.par_iter().map(|s| load_image(&s.path)).collect();
    let mut report = GeometryReport::default();
    for (s, r) in samples.iter().zip(loaded) {
        match r {
            Ok(img) => report.sizes.push(ImageSize {
                path: s.rel.clone(),
                width: img.width(),
                height: img.height(),
            }),
            Err(e) => report.unreadable.push(Unreadable {
                path: s.rel.clone(),
                error: e.to_string(),
            }),
        }
    }
    let heights: Vec<usize> = report.sizes.iter().map(|s| s.height).collect();
    [report.above_32, report.above_48, report.above_64] = height_fractions(&heights);
    report
}

/// Copies `n` seeded-random samples into `dir/images/` and writes
/// `dir/labels.tsv` pointing at the copies.
pub fn export_label_audit_sample(samples: &[Sample], n: usize, seed: u64, dir: &Path) -> Result<Vec<Sample>, StatsError> {
    if n > samples.len() {
        return Err(StatsError::AuditTooLarge {
            requested: n,
            available: samples.len(),
        });
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    Rng::stream(seed, &[0xa0d1]).shuffle(&mut order);
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(io_err(&images))?;
    let mut out = Vec::with_capacity(n);
    for (k, &i) in order[..n].iter().enumerate() {
        let s = &samples[i];
        let name = s.path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let rel = format!("images/{k:05}_{name}");
        let dest = dir.join(&rel);
        fs::copy(&s.path, &dest).map_err(io_err(&s.path))?;
        out.push(Sample::new(rel, s.label.clone()));
    }
    let labels = dir.join("labels.tsv");
    write_annotations(&labels, &out).map_err(io_err(&labels))?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub samples: usize,
    pub distinct_chars: usize,
    pub buckets: FrequencyBuckets,
    pub lengths: LengthHistogram,
    pub geometry: Option<GeometryReport>,
}

impl SplitReport {
    pub fn build(samples: &[Sample], with_images: bool) -> Result<Self, StatsError> {
        let labels = || samples.iter().map(|s| s.label.as_str());
        let buckets = char_frequency_report(labels())?;
        Ok(Self {
            samples: samples.len(),
            distinct_chars: buckets.total,
            buckets,
            lengths: length_histogram(labels()),
            geometry: with_images.then(|| image_geometry_report(samples)),
        })
    }

    pub fn unreadable(&self) -> usize {
        self.geometry.as_ref().map_or(0, |g| g.unreadable.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub seed: u64,
    pub split_ratio: Option<f64>,
    /// Keyed by split name (`all`, `train`, `val`).
    pub splits: BTreeMap<String, SplitReport>,
}

impl CorpusReport {
    pub fn unreadable(&self) -> usize {
        self.splits.values().map(SplitReport::unreadable).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Long-format `split,metric,key,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("split,metric,key,value\n");
        for (name, r) in &self.splits {
            s.push_str(&format!("{name},samples,,{}\n", r.samples));
            s.push_str(&format!("{name},distinct_chars,,{}\n", r.distinct_chars));
            for (label, n) in FrequencyBuckets::LABELS.iter().zip(r.buckets.counts()) {
                s.push_str(&format!("{name},frequency_bucket,{label},{n}\n"));
            }
            for (len, n) in &r.lengths.counts {
                s.push_str(&format!("{name},text_length,{len},{n}\n"));
            }
            s.push_str(&format!("{name},max_text_length,,{}\n", r.lengths.max));
            if let Some(g) = &r.geometry {
                for (t, f) in HEIGHT_THRESHOLDS.iter().zip([g.above_32, g.above_48, g.above_64]) {
                    s.push_str(&format!("{name},height_above,{t},{f}\n"));
                }
                s.push_str(&format!("{name},unreadable,,{}\n", g.unreadable.len()));
            }
        }
        s
    }

    /// Writes `report.json`, `report.csv` and per-split SVG figures.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, StatsError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut files = vec![
            (dir.join("report.json"), self.to_json()),
            (dir.join("report.csv"), self.to_csv()),
        ];
        for (name, r) in &self.splits {
            let bars: Vec<(String, f64)> = r.lengths.counts.iter().map(|(k, v)| (k.to_string(), *v as f64)).collect();
            files.push((
                dir.join(format!("lengths_{name}.svg")),
                svg::bar_chart(&format!("Text length ({name})"), "length", "labels", &bars),
            ));
            let bars: Vec<(String, f64)> = FrequencyBuckets::LABELS
                .iter()
                .zip(r.buckets.counts())
                .map(|(l, n)| (l.to_string(), n as f64))
                .collect();
            files.push((
                dir.join(format!("frequency_{name}.svg")),
                svg::bar_chart(&format!("Character frequency ({name})"), "occurrences", "characters", &bars),
            ));
            if let Some(g) = &r.geometry {
                let points: Vec<(f64, f64)> = g.sizes.iter().map(|s| (s.width as f64, s.height as f64)).collect();
                files.push((
                    dir.join(format!("scale_{name}.svg")),
                    svg::scatter(&format!("Image scale ({name})"), "width", "height", &points),
                ));
                let mut heights: BTreeMap<usize, usize> = BTreeMap::new();
                for s in &g.sizes {
                    *heights.entry(s.height).or_default() += 1;
                }
                let bars: Vec<(String, f64)> = heights.iter().map(|(k, v)| (k.to_string(), *v as f64)).collect();
                files.push((
                    dir.join(format!("heights_{name}.svg")),
                    svg::bar_chart(&format!("Image height ({name})"), "height", "images", &bars),
                ));
            }
        }
        for (path, text) in &files {
            fs::write(path, text).map_err(io_err(path))?;
        }
        Ok(files.into_iter().map(|f| f.0).collect())
    }
}

/// Report over the whole corpus and, when `split_ratio` is given, over
/// its seeded train/val split.
pub fn corpus_report(samples: &[Sample], split_ratio: Option<f64>, seed: u64, with_images: bool) -> Result<CorpusReport, StatsError> {
    let mut splits = BTreeMap::new();
    splits.insert("all".to_string(), SplitReport::build(samples, with_images)?);
    if let Some(ratio) = split_ratio {
        let (train, val) = split_train_val(samples, ratio, seed)?;
        splits.insert("train".to_string(), SplitReport::build(&train, with_images)?);
        splits.insert("val".to_string(), SplitReport::build(&val, with_images)?);
    }
    Ok(CorpusReport {
        seed,
        split_ratio,
        splits,
    })
}
