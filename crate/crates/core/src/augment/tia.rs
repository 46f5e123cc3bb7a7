//! Fiducial-point warping: points on the top and bottom edges are jittered
//! and the image is resampled through a piecewise-affine map over the
//! triangulated point mesh.

use serde::{Deserialize, Serialize};

use crate::imaging::ImageBuffer;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiaMode {
    /// Every point moves independently in both axes.
    Distortion,
    /// Every point moves horizontally only.
    Stretch,
    /// The four corners move; edge points stay on the straight lines between
    /// them.
    Perspective,
}

pub const ALL_MODES: [TiaMode; 3] = [TiaMode::Distortion, TiaMode::Stretch, TiaMode::Perspective];

pub type Point = (f64, f64);

/// `n` points evenly spaced on the top edge followed by `n` on the bottom
/// edge, as `(x, y)`.
pub fn fiducial_grid(height: usize, width: usize, n: usize) -> Vec<Point> {
    let xmax = (width - 1) as f64;
    let ymax = (height - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| xmax * i as f64 / (n - 1) as f64).collect();
    xs.iter().map(|&x| (x, 0.0)).chain(xs.iter().map(|&x| (x, ymax))).collect()
}

/// Uniform draw from the disc of the given radius.
fn disc(rng: &mut Rng, radius: f64) -> (f64, f64) {
    if radius <= 0.0 {
        return (0.0, 0.0);
    }
    loop {
        let dx = rng.uniform(-1.0, 1.0);
        let dy = rng.uniform(-1.0, 1.0);
        if dx * dx + dy * dy <= 1.0 {
            return (dx * radius, dy * radius);
        }
    }
}

/// Jittered copy of the grid, clamped to the frame.
pub fn jitter_points(src: &[Point], height: usize, width: usize, mode: TiaMode, radius: f64, rng: &mut Rng) -> Vec<Point> {
    let n = src.len() / 2;
    let xmax = (width - 1) as f64;
    let ymax = (height - 1) as f64;
    let clamp = |(x, y): Point| (x.clamp(0.0, xmax), y.clamp(0.0, ymax));
    match mode {
        TiaMode::Distortion => src
            .iter()
            .map(|&(x, y)| {
                let (dx, dy) = disc(rng, radius);
                clamp((x + dx, y + dy))
            })
            .collect(),
        TiaMode::Stretch => src
            .iter()
            .map(|&(x, y)| {
                let dx = if radius > 0.0 { rng.uniform(-radius, radius) } else { 0.0 };
                clamp((x + dx, y))
            })
            .collect(),
        TiaMode::Perspective => {
            let mut corners = [src[0], src[n - 1], src[n], src[2 * n - 1]];
            for c in corners.iter_mut() {
                let (dx, dy) = disc(rng, radius);
                *c = clamp((c.0 + dx, c.1 + dy));
            }
            let lerp = |a: Point, b: Point, f: f64| (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f);
            let top = (0..n).map(|i| lerp(corners[0], corners[1], i as f64 / (n - 1) as f64));
            let bottom = (0..n).map(|i| lerp(corners[2], corners[3], i as f64 / (n - 1) as f64));
            top.chain(bottom).collect()
        }
    }
}

/// Triangles over the two-row mesh as index triples.
fn triangles(n: usize) -> Vec<[usize; 3]> {
    let mut tris = Vec::with_capacity(2 * (n - 1));
    for i in 0..n - 1 {
        tris.push([i, i + 1, n + i]);
        tris.push([i + 1, n + i + 1, n + i]);
    }
    tris
}

/// Affine map taking destination triangle coordinates to source coordinates,
/// stored as barycentric solve data.
struct Piece {
    // Inverse of the destination edge matrix.
    inv: [[f64; 2]; 2],
    origin: Point,
    src: [Point; 3],
}

impl Piece {
    fn new(dst: [Point; 3], src: [Point; 3]) -> Option<Self> {
        let (e1x, e1y) = (dst[1].0 - dst[0].0, dst[1].1 - dst[0].1);
        let (e2x, e2y) = (dst[2].0 - dst[0].0, dst[2].1 - dst[0].1);
        let det = e1x * e2y - e2x * e1y;
        if det.abs() < 1e-9 {
            return None;
        }
        Some(Self {
            inv: [[e2y / det, -e2x / det], [-e1y / det, e1x / det]],
            origin: dst[0],
            src,
        })
    }

    fn barycentric(&self, p: Point) -> (f64, f64, f64) {
        let (dx, dy) = (p.0 - self.origin.0, p.1 - self.origin.1);
        let u = self.inv[0][0] * dx + self.inv[0][1] * dy;
        let v = self.inv[1][0] * dx + self.inv[1][1] * dy;
        (1.0 - u - v, u, v)
    }

    fn map(&self, (a, b, c): (f64, f64, f64)) -> Point {
        (
            a * self.src[0].0 + b * self.src[1].0 + c * self.src[2].0,
            a * self.src[0].1 + b * self.src[1].1 + c * self.src[2].1,
        )
    }
}

fn sample_bilinear(img: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let x = x.clamp(0.0, (img.width() - 1) as f64);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p00 = img.get(y0, x0, c) as f64;
    let p01 = img.get(y0, x1, c) as f64;
    let p10 = img.get(y1, x0, c) as f64;
    let p11 = img.get(y1, x1, c) as f64;
    let top = p00 + (p01 - p00) * fx;
    let bot = p10 + (p11 - p10) * fx;
    top + (bot - top) * fy
}

/// Resamples `img` so that each `dst` point shows the content found at the
/// matching `src` point. Pixels outside the destination mesh use the affine
/// map of the nearest triangle; source lookups clamp at the border.
pub fn warp_piecewise_affine(img: &ImageBuffer, src: &[Point], dst: &[Point]) -> ImageBuffer {
    let n = src.len() / 2;
    let pieces: Vec<Piece> = triangles(n)
        .into_iter()
        .filter_map(|[a, b, c]| Piece::new([dst[a], dst[b], dst[c]], [src[a], src[b], src[c]]))
        .collect();
    if pieces.is_empty() {
        return img.clone();
    }
    let ch = img.channels();
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = (x as f64, y as f64);
            // Containing triangle, or the one the point is least outside of.
            let mut best = (f64::NEG_INFINITY, 0, (0.0, 0.0, 0.0));
            for (i, piece) in pieces.iter().enumerate() {
                let bc = piece.barycentric(p);
                let inside = bc.0.min(bc.1).min(bc.2);
                if inside > best.0 {
                    best = (inside, i, bc);
                    if inside >= 0.0 {
                        break;
                    }
                }
            }
            let (sx, sy) = pieces[best.1].map(best.2);
            for c in 0..ch {
                let v = sample_bilinear(img, sx, sy, c);
                out.set(y, x, c, v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// Outcome of a TIA application.
#[derive(Clone, Debug, PartialEq)]
pub struct TiaOutput {
    pub image: ImageBuffer,
    /// Set when the image was too narrow for the drawn point count and was
    /// returned unchanged.
    pub skipped_too_small: bool,
}

/// Warps with `points` fiducials per edge, jittered within `radius`.
pub fn tia_with(img: &ImageBuffer, rng: &mut Rng, points: usize, mode: TiaMode, radius: f64) -> TiaOutput {
    let points = points.max(2);
    if img.width() < 2 * points || img.height() < 2 {
        return TiaOutput {
            image: img.clone(),
            skipped_too_small: true,
        };
    }
    let src = fiducial_grid(img.height(), img.width(), points);
    let dst = jitter_points(&src, img.height(), img.width(), mode, radius, rng);
    TiaOutput {
        image: warp_piecewise_affine(img, &src, &dst),
        skipped_too_small: false,
    }
}

/// Draws the point count from `points_range` and jitters within
/// `width / (4·n)`.
pub fn tia_distort(img: &ImageBuffer, rng: &mut Rng, points_range: (usize, usize), mode: TiaMode) -> TiaOutput {
    let n = rng.int_inclusive(points_range.0, points_range.1);
    let radius = img.width() as f64 / (4 * n.max(1)) as f64;
    tia_with(img, rng, n, mode, radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize) -> ImageBuffer {
        let data = (0..h * w).map(|i| ((i % w) * 3 + (i / w) * 11) as u8).collect();
        ImageBuffer::new(h, w, 1, data).unwrap()
    }

    #[test]
    fn zero_radius_is_identity() {
        let img = textured(20, 60);
        for mode in ALL_MODES {
            let mut rng = Rng::new(3);
            let out = tia_with(&img, &mut rng, 4, mode, 0.0);
            assert_eq!(out.image, img, "{mode:?}");
        }
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = ImageBuffer::filled(24, 90, 3, 77);
        for mode in ALL_MODES {
            let mut rng = Rng::new(11);
            let out = tia_distort(&img, &mut rng, (3, 6), mode);
            assert!(out.image.data().iter().all(|&v| v == 77));
        }
    }

    #[test]
    fn narrow_image_is_skipped() {
        let img = textured(10, 5);
        let mut rng = Rng::new(0);
        let out = tia_with(&img, &mut rng, 3, TiaMode::Distortion, 1.0);
        assert!(out.skipped_too_small);
        assert_eq!(out.image, img);
    }

    #[test]
    fn stretch_keeps_rows_vertical() {
        let src = fiducial_grid(10, 40, 4);
        let mut rng = Rng::new(5);
        let dst = jitter_points(&src, 10, 40, TiaMode::Stretch, 3.0, &mut rng);
        for (s, d) in src.iter().zip(&dst) {
            assert_eq!(s.1, d.1);
            assert!((s.0 - d.0).abs() <= 3.0);
        }
    }

    #[test]
    fn perspective_keeps_edges_straight() {
        let src = fiducial_grid(30, 90, 5);
        let mut rng = Rng::new(9);
        let dst = jitter_points(&src, 30, 90, TiaMode::Perspective, 6.0, &mut rng);
        let (a, b) = (dst[0], dst[4]);
        for p in &dst[1..4] {
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            assert!(cross.abs() < 1e-9);
        }
    }

    #[test]
    fn output_size_unchanged() {
        let img = textured(32, 100);
        let mut rng = Rng::new(1);
        let out = tia_distort(&img, &mut rng, (3, 6), TiaMode::Distortion);
        assert_eq!((out.image.height(), out.image.width()), (32, 100));
    }
}
