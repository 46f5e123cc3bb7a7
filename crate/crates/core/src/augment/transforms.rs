//! Individual image transforms. Each random transform has a `*_with`
//! variant taking its drawn parameters explicitly.

use crate::imaging::ImageBuffer;
use crate::rng::Rng;

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

// ----------------------------------------------------------- height crop

/// Drops `rows` rows from the top or the bottom. A crop that would leave no
/// rows is a no-op.
pub fn height_crop_with(img: &ImageBuffer, rows: usize, from_top: bool) -> ImageBuffer {
    if rows == 0 || rows >= img.height() {
        return img.clone();
    }
    if from_top {
        img.crop_rows(rows, img.height())
    } else {
        img.crop_rows(0, img.height() - rows)
    }
}

/// Removes `r ~ U{0, ..., floor(ratio_max·H)}` rows from a fair-coin side.
pub fn random_height_crop(img: &ImageBuffer, rng: &mut Rng, ratio_max: f64) -> ImageBuffer {
    let max_rows = (ratio_max.max(0.0) * img.height() as f64).floor() as usize;
    let rows = rng.int_inclusive(0, max_rows);
    let from_top = rng.coin();
    height_crop_with(img, rows, from_top)
}

// ---------------------------------------------------------------- cutout

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutoutRect {
    pub y: usize,
    pub x: usize,
    pub height: usize,
    pub width: usize,
    pub color: [u8; 3],
}

/// Fills each rectangle (clipped to the frame) with its color.
pub fn cutout_with(img: &ImageBuffer, rects: &[CutoutRect]) -> ImageBuffer {
    let mut out = img.clone();
    let ch = img.channels();
    for r in rects {
        let y1 = (r.y + r.height).min(img.height());
        let x1 = (r.x + r.width).min(img.width());
        for y in r.y.min(y1)..y1 {
            for x in r.x.min(x1)..x1 {
                for c in 0..ch {
                    out.set(y, x, c, r.color[c]);
                }
            }
        }
    }
    out
}

/// Side length for a cutout: `floor(ratio · extent)`, at least one pixel.
pub fn cutout_side(ratio: f64, extent: usize) -> usize {
    ((ratio * extent as f64).floor() as usize).clamp(1, extent)
}

pub fn draw_cutout_rects(
    img: &ImageBuffer,
    rng: &mut Rng,
    count_range: (usize, usize),
    ratio_range: (f64, f64),
) -> Vec<CutoutRect> {
    let k = rng.int_inclusive(count_range.0, count_range.1);
    (0..k)
        .map(|_| {
            let ratio = rng.uniform(ratio_range.0, ratio_range.1);
            let height = cutout_side(ratio, img.height());
            let width = cutout_side(ratio, img.width());
            let y = rng.int_inclusive(0, img.height() - 1);
            let x = rng.int_inclusive(0, img.width() - 1);
            let mut color = [0u8; 3];
            for c in color.iter_mut() {
                *c = rng.int_inclusive(0, 255) as u8;
            }
            CutoutRect {
                y,
                x,
                height,
                width,
                color,
            }
        })
        .collect()
}

pub fn cutout(img: &ImageBuffer, rng: &mut Rng, count_range: (usize, usize), ratio_range: (f64, f64)) -> ImageBuffer {
    let rects = draw_cutout_rects(img, rng, count_range, ratio_range);
    cutout_with(img, &rects)
}

// ---------------------------------------------------------- gauss noise

/// Adds i.i.d. `N(0, std²)` to every sample, rounding and clamping.
pub fn gauss_noise_with_std(img: &ImageBuffer, rng: &mut Rng, std: f64) -> ImageBuffer {
    if std <= 0.0 {
        return img.clone();
    }
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = to_u8(*v as f64 + std * rng.normal());
    }
    out
}

/// Draws one standard deviation per image from `std_range`.
pub fn gauss_noise(img: &ImageBuffer, rng: &mut Rng, std_range: (f64, f64)) -> ImageBuffer {
    let std = rng.uniform(std_range.0, std_range.1);
    gauss_noise_with_std(img, rng, std)
}

// ---------------------------------------------------------- motion blur

/// Square `size × size` line kernel through the centre at `angle_deg`
/// (0° = horizontal). The `size` unit-spaced sample points along the line
/// spread their weight bilinearly over neighbouring cells; the result is
/// normalized to sum to 1.
pub fn motion_kernel(size: usize, angle_deg: f64) -> Vec<f64> {
    let mut k = vec![0.0; size * size];
    let centre = (size - 1) as f64 / 2.0;
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    for j in 0..size {
        let d = j as f64 - centre;
        let x = (centre + d * cos).clamp(0.0, (size - 1) as f64);
        let y = (centre - d * sin).clamp(0.0, (size - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let x1 = (x0 + 1).min(size - 1);
        let y1 = (y0 + 1).min(size - 1);
        k[y0 * size + x0] += (1.0 - fx) * (1.0 - fy);
        k[y0 * size + x1] += fx * (1.0 - fy);
        k[y1 * size + x0] += (1.0 - fx) * fy;
        k[y1 * size + x1] += fx * fy;
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Convolves with a square kernel, replicating edge pixels.
pub fn convolve_replicate(img: &ImageBuffer, kernel: &[f64], size: usize) -> ImageBuffer {
    let (h, w, ch) = (img.height() as isize, img.width() as isize, img.channels());
    let r = (size / 2) as isize;
    let taps: Vec<(isize, isize, f64)> = (0..size * size)
        .filter(|&i| kernel[i] != 0.0)
        .map(|i| ((i / size) as isize - r, (i % size) as isize - r, kernel[i]))
        .collect();
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for &(dy, dx, wt) in &taps {
                    let sy = (y + dy).clamp(0, h - 1) as usize;
                    let sx = (x + dx).clamp(0, w - 1) as usize;
                    acc += wt * img.get(sy, sx, c) as f64;
                }
                out.set(y as usize, x as usize, c, to_u8(acc));
            }
        }
    }
    out
}

pub fn motion_blur_with(img: &ImageBuffer, size: usize, angle_deg: f64) -> ImageBuffer {
    convolve_replicate(img, &motion_kernel(size, angle_deg), size)
}

/// Odd kernel size uniform over the odd values in `kernel_range`, angle
/// uniform in `[0°, 180°)`.
pub fn motion_blur(img: &ImageBuffer, rng: &mut Rng, kernel_range: (usize, usize)) -> ImageBuffer {
    let odd: Vec<usize> = (kernel_range.0..=kernel_range.1).filter(|k| k % 2 == 1).collect();
    let size = odd[rng.int_inclusive(0, odd.len() - 1)];
    let angle = rng.uniform(0.0, 180.0);
    motion_blur_with(img, size, angle)
}

// ------------------------------------------------------- optional stages

pub fn pixel_reverse(img: &ImageBuffer) -> ImageBuffer {
    let mut out = img.clone();
    out.data_mut().iter_mut().for_each(|v| *v = 255 - *v);
    out
}

/// Brightness and contrast scaling; for RGB inputs also a saturation blend
/// toward the pixel's luma.
pub fn color_jitter_with(img: &ImageBuffer, brightness: f64, contrast: f64, saturation: f64) -> ImageBuffer {
    let n = img.data().len();
    let mean = img.data().iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let mut vals: Vec<f64> = img
        .data()
        .iter()
        .map(|&v| ((v as f64 - mean) * contrast + mean) * brightness)
        .collect();
    if img.channels() == 3 && saturation != 1.0 {
        for p in vals.chunks_exact_mut(3) {
            let gray = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            for v in p.iter_mut() {
                *v = gray + (*v - gray) * saturation;
            }
        }
    }
    let data = vals.into_iter().map(to_u8).collect();
    ImageBuffer::new(img.height(), img.width(), img.channels(), data).expect("same shape")
}

pub fn color_jitter(img: &ImageBuffer, rng: &mut Rng, factor_range: (f64, f64)) -> ImageBuffer {
    let b = rng.uniform(factor_range.0, factor_range.1);
    let c = rng.uniform(factor_range.0, factor_range.1);
    let s = rng.uniform(factor_range.0, factor_range.1);
    color_jitter_with(img, b, c, s)
}

/// Rotates about the centre by `degrees` (counter-clockwise) and shrinks by
/// the factor that keeps the whole rotated source inside the frame. Uncovered
/// pixels take the nearest border value.
pub fn rotate_with(img: &ImageBuffer, degrees: f64) -> ImageBuffer {
    if degrees == 0.0 {
        return img.clone();
    }
    let (h, w) = (img.height() as f64, img.width() as f64);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let bound_w = w * cos.abs() + h * sin.abs();
    let bound_h = w * sin.abs() + h * cos.abs();
    let scale = (w / bound_w).min(h / bound_h);
    let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            // Inverse map: un-scale, then rotate by -θ (image y points down).
            let dx = (x as f64 - cx) / scale;
            let dy = (y as f64 - cy) / scale;
            let sx = cx + dx * cos - dy * sin;
            let sy = cy + dx * sin + dy * cos;
            for c in 0..img.channels() {
                let v = bilinear_clamped(img, sx, sy, c);
                out.set(y, x, c, to_u8(v));
            }
        }
    }
    out
}

fn bilinear_clamped(img: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let x = x.clamp(0.0, (img.width() - 1) as f64);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = img.get(y0, x0, c) as f64 * (1.0 - fx) + img.get(y0, x1, c) as f64 * fx;
    let bot = img.get(y1, x0, c) as f64 * (1.0 - fx) + img.get(y1, x1, c) as f64 * fx;
    top * (1.0 - fy) + bot * fy
}

/// Angle uniform in `(-max_degrees, max_degrees)`.
pub fn random_rotate(img: &ImageBuffer, rng: &mut Rng, max_degrees: f64) -> ImageBuffer {
    let deg = rng.uniform(-max_degrees, max_degrees);
    rotate_with(img, deg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize, ch: usize) -> ImageBuffer {
        let data = (0..h * w * ch).map(|i| (i * 31 % 251) as u8).collect();
        ImageBuffer::new(h, w, ch, data).unwrap()
    }

    #[test]
    fn crop_zero_rows_is_identity() {
        let img = textured(10, 4, 1);
        assert_eq!(height_crop_with(&img, 0, true), img);
    }

    #[test]
    fn crop_top_keeps_lower_rows() {
        let img = textured(100, 3, 1);
        let out = height_crop_with(&img, 5, true);
        assert_eq!(out.height(), 95);
        assert_eq!(out, img.crop_rows(5, 100));
        assert_eq!(out.get(0, 0, 0), img.get(5, 0, 0));
    }

    #[test]
    fn crop_single_row_image_is_identity() {
        let img = textured(1, 8, 1);
        let mut rng = Rng::new(0);
        for _ in 0..20 {
            assert_eq!(random_height_crop(&img, &mut rng, 0.05), img);
        }
    }

    #[test]
    fn crop_stays_within_ratio() {
        let img = textured(100, 2, 1);
        let mut rng = Rng::new(4);
        for _ in 0..200 {
            let h = random_height_crop(&img, &mut rng, 0.05).height();
            assert!((95..=100).contains(&h));
        }
    }

    #[test]
    fn cutout_rect_becomes_constant() {
        let img = textured(100, 100, 1);
        let rect = CutoutRect {
            y: 20,
            x: 30,
            height: cutout_side(0.1, 100),
            width: cutout_side(0.1, 100),
            color: [9, 9, 9],
        };
        let out = cutout_with(&img, &[rect]);
        let changed = (0..100 * 100).filter(|&i| out.data()[i] != img.data()[i]).count();
        assert!(changed <= 100);
        for y in 20..30 {
            for x in 30..40 {
                assert_eq!(out.get(y, x, 0), 9);
            }
        }
        assert_eq!(out.get(19, 30, 0), img.get(19, 30, 0));
        assert_eq!(out.get(20, 40, 0), img.get(20, 40, 0));
    }

    #[test]
    fn cutout_with_zero_count_is_identity() {
        let img = textured(20, 20, 3);
        let mut rng = Rng::new(1);
        assert_eq!(cutout(&img, &mut rng, (0, 0), (0.05, 0.1)), img);
    }

    #[test]
    fn cutout_clips_to_frame() {
        let img = textured(10, 10, 1);
        let rect = CutoutRect {
            y: 8,
            x: 8,
            height: 5,
            width: 5,
            color: [0; 3],
        };
        let out = cutout_with(&img, &[rect]);
        assert_eq!(out.height(), 10);
    }

    #[test]
    fn zero_std_noise_is_identity() {
        let img = textured(5, 5, 1);
        let mut rng = Rng::new(2);
        assert_eq!(gauss_noise_with_std(&img, &mut rng, 0.0), img);
        assert_eq!(gauss_noise(&img, &mut rng, (0.0, 0.0)), img);
    }

    #[test]
    fn noise_on_black_biases_upward() {
        let img = ImageBuffer::filled(100, 100, 1, 0);
        let mut rng = Rng::new(3);
        let out = gauss_noise_with_std(&img, &mut rng, 10.0);
        let mean = out.data().iter().map(|&v| v as f64).sum::<f64>() / 10_000.0;
        assert!(mean > 0.0);
    }

    #[test]
    fn horizontal_three_tap_kernel() {
        let k = motion_kernel(3, 0.0);
        let third = 1.0 / 3.0;
        assert_eq!(k, vec![0.0, 0.0, 0.0, third, third, third, 0.0, 0.0, 0.0]);
        // Hand convolution of [0, 255, 0] at the centre: 255 / 3 = 85.
        let img = ImageBuffer::new(1, 3, 1, vec![0, 255, 0]).unwrap();
        let out = motion_blur_with(&img, 3, 0.0);
        assert_eq!(out.get(0, 1, 0), 85);
    }

    #[test]
    fn kernels_are_normalized() {
        for size in [3, 5, 7] {
            for angle in [0.0, 17.0, 45.0, 90.0, 133.3, 179.9] {
                let k = motion_kernel(size, angle);
                assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(k.iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn blur_preserves_uniform_and_range() {
        let img = ImageBuffer::filled(9, 9, 3, 201);
        let mut rng = Rng::new(5);
        for _ in 0..20 {
            assert_eq!(motion_blur(&img, &mut rng, (3, 7)), img);
        }
        let img = textured(12, 15, 1);
        let (lo, hi) = img.min_max();
        let out = motion_blur(&img, &mut rng, (3, 7));
        let (olo, ohi) = out.min_max();
        assert!(olo >= lo && ohi <= hi);
    }

    #[test]
    fn pixel_reverse_is_an_involution() {
        let img = textured(7, 9, 3);
        assert_eq!(pixel_reverse(&pixel_reverse(&img)), img);
        assert_eq!(pixel_reverse(&ImageBuffer::filled(1, 1, 1, 10)).data(), &[245]);
    }

    #[test]
    fn rotate_zero_and_unit_jitter_are_identity() {
        let img = textured(16, 40, 3);
        assert_eq!(rotate_with(&img, 0.0), img);
        assert_eq!(color_jitter_with(&img, 1.0, 1.0, 1.0), img);
    }

    #[test]
    fn rotated_constant_is_constant() {
        let img = ImageBuffer::filled(20, 60, 1, 140);
        let mut rng = Rng::new(8);
        let out = random_rotate(&img, &mut rng, 10.0);
        assert!(out.data().iter().all(|&v| v == 140));
    }
}
