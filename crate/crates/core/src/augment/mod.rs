//! Seeded augmentation chain.
//!
//! Stages run in one fixed order:
//!
//! ```text
//! height_crop → cutout → tia → random_rotate → resize
//!             → color_jitter → pixel_reverse → gauss_noise → motion_blur
//! ```
//!
//! Blur runs after the resize so a kernel size means the same thing at every
//! input scale, and noise runs before blur. The order is not configurable; a
//! config that lists a different order fails validation. Every stage draws
//! from its own random stream keyed by the stage id, so toggling one stage
//! leaves the draws of all others untouched.

mod tia;
mod transforms;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{resize_to, ImageBuffer, ResizePolicy};
use crate::rng::Rng;

pub use tia::{fiducial_grid, jitter_points, tia_distort, tia_with, warp_piecewise_affine, TiaMode, TiaOutput, ALL_MODES};
pub use transforms::{
    color_jitter, color_jitter_with, convolve_replicate, cutout, cutout_side, cutout_with, draw_cutout_rects, gauss_noise,
    gauss_noise_with_std, height_crop_with, motion_blur, motion_blur_with, motion_kernel, pixel_reverse, random_height_crop,
    random_rotate, rotate_with, CutoutRect,
};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid augmentation config: {0}")]
    Invalid(String),
    #[error("augmentation config: {0}")]
    Parse(String),
    #[error("augmentation config {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Pipeline stages in their fixed execution order. The discriminant is the
/// stage's random-stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    HeightCrop = 1,
    Cutout = 2,
    Tia = 3,
    RandomRotate = 4,
    Resize = 5,
    ColorJitter = 6,
    PixelReverse = 7,
    GaussNoise = 8,
    MotionBlur = 9,
}

impl Stage {
    pub const ORDER: [Stage; 9] = [
        Stage::HeightCrop,
        Stage::Cutout,
        Stage::Tia,
        Stage::RandomRotate,
        Stage::Resize,
        Stage::ColorJitter,
        Stage::PixelReverse,
        Stage::GaussNoise,
        Stage::MotionBlur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::HeightCrop => "height_crop",
            Stage::Cutout => "cutout",
            Stage::Tia => "tia",
            Stage::RandomRotate => "random_rotate",
            Stage::Resize => "resize",
            Stage::ColorJitter => "color_jitter",
            Stage::PixelReverse => "pixel_reverse",
            Stage::GaussNoise => "gauss_noise",
            Stage::MotionBlur => "motion_blur",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_probability() -> f64 {
    0.4
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightCropConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_probability")]
    pub probability: f64,
    pub ratio_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoutConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_probability")]
    pub probability: f64,
    pub count: (usize, usize),
    pub ratio: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiaConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_probability")]
    pub probability: f64,
    pub points: (usize, usize),
    /// Drawn uniformly per application.
    pub modes: Vec<TiaMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussNoiseConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_probability")]
    pub probability: f64,
    /// Standard deviation range in gray levels.
    pub std: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionBlurConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_probability")]
    pub probability: f64,
    pub kernel: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorJitterConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_probability")]
    pub probability: f64,
    pub factor: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelReverseConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_probability")]
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRotateConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_probability")]
    pub probability: f64,
    pub max_degrees: f64,
}

/// Augmentation settings. Serialized as TOML with a `version` key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub version: u32,
    pub target_height: usize,
    pub target_width: usize,
    #[serde(default)]
    pub resize_policy: ResizePolicy,
    /// Optional restatement of the stage order; must match [`Stage::ORDER`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<Stage>>,
    pub height_crop: HeightCropConfig,
    pub cutout: CutoutConfig,
    pub tia: TiaConfig,
    pub gauss_noise: GaussNoiseConfig,
    pub motion_blur: MotionBlurConfig,
    pub color_jitter: ColorJitterConfig,
    pub pixel_reverse: PixelReverseConfig,
    pub random_rotate: RandomRotateConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let p = default_probability();
        Self {
            version: CONFIG_VERSION,
            target_height: 48,
            target_width: 480,
            resize_policy: ResizePolicy::PadRight,
            order: None,
            height_crop: HeightCropConfig {
                enabled: true,
                probability: p,
                ratio_max: 0.05,
            },
            cutout: CutoutConfig {
                enabled: true,
                probability: p,
                count: (1, 3),
                ratio: (0.05, 0.1),
            },
            tia: TiaConfig {
                enabled: true,
                probability: p,
                points: (3, 6),
                modes: ALL_MODES.to_vec(),
            },
            gauss_noise: GaussNoiseConfig {
                enabled: true,
                probability: p,
                std: (0.0, 10.0),
            },
            motion_blur: MotionBlurConfig {
                enabled: true,
                probability: p,
                kernel: (3, 7),
            },
            color_jitter: ColorJitterConfig {
                enabled: false,
                probability: p,
                factor: (0.8, 1.2),
            },
            pixel_reverse: PixelReverseConfig {
                enabled: false,
                probability: p,
            },
            random_rotate: RandomRotateConfig {
                enabled: false,
                probability: p,
                max_degrees: 10.0,
            },
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), AugmentError> {
    if cond {
        Ok(())
    } else {
        Err(AugmentError::Invalid(msg()))
    }
}

fn check_prob(name: &str, p: f64) -> Result<(), AugmentError> {
    check((0.0..=1.0).contains(&p), || format!("{name}.probability {p} outside [0, 1]"))
}

impl AugmentConfig {
    /// Only the resize runs.
    pub fn disabled(target_height: usize, target_width: usize) -> Self {
        let mut cfg = Self {
            target_height,
            target_width,
            ..Self::default()
        };
        cfg.height_crop.enabled = false;
        cfg.cutout.enabled = false;
        cfg.tia.enabled = false;
        cfg.gauss_noise.enabled = false;
        cfg.motion_blur.enabled = false;
        cfg
    }

    /// Application probability of a stage, zero when it is disabled. The
    /// resize always runs.
    pub fn probability(&self, stage: Stage) -> f64 {
        let (enabled, p) = match stage {
            Stage::HeightCrop => (self.height_crop.enabled, self.height_crop.probability),
            Stage::Cutout => (self.cutout.enabled, self.cutout.probability),
            Stage::Tia => (self.tia.enabled, self.tia.probability),
            Stage::RandomRotate => (self.random_rotate.enabled, self.random_rotate.probability),
            Stage::Resize => (true, 1.0),
            Stage::ColorJitter => (self.color_jitter.enabled, self.color_jitter.probability),
            Stage::PixelReverse => (self.pixel_reverse.enabled, self.pixel_reverse.probability),
            Stage::GaussNoise => (self.gauss_noise.enabled, self.gauss_noise.probability),
            Stage::MotionBlur => (self.motion_blur.enabled, self.motion_blur.probability),
        };
        if enabled {
            p
        } else {
            0.0
        }
    }

    pub fn set_probability(&mut self, p: f64) {
        self.height_crop.probability = p;
        self.cutout.probability = p;
        self.tia.probability = p;
        self.gauss_noise.probability = p;
        self.motion_blur.probability = p;
        self.color_jitter.probability = p;
        self.pixel_reverse.probability = p;
        self.random_rotate.probability = p;
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        check(self.version == CONFIG_VERSION, || {
            format!("unsupported version {} (expected {CONFIG_VERSION})", self.version)
        })?;
        check(self.target_height >= 1 && self.target_width >= 1, || {
            "target size must be at least 1x1".into()
        })?;
        if let Some(order) = &self.order {
            check(order.as_slice() == Stage::ORDER, || {
                let names: Vec<&str> = Stage::ORDER.iter().map(|s| s.name()).collect();
                format!("stage order is fixed as [{}]", names.join(", "))
            })?;
        }
        check_prob("height_crop", self.height_crop.probability)?;
        check_prob("cutout", self.cutout.probability)?;
        check_prob("tia", self.tia.probability)?;
        check_prob("gauss_noise", self.gauss_noise.probability)?;
        check_prob("motion_blur", self.motion_blur.probability)?;
        check_prob("color_jitter", self.color_jitter.probability)?;
        check_prob("pixel_reverse", self.pixel_reverse.probability)?;
        check_prob("random_rotate", self.random_rotate.probability)?;

        let r = self.height_crop.ratio_max;
        check((0.0..1.0).contains(&r), || format!("height_crop.ratio_max {r} outside [0, 1)"))?;

        let (lo, hi) = self.cutout.count;
        check(lo <= hi && hi <= 16, || format!("cutout.count ({lo}, {hi}) invalid"))?;
        let (lo, hi) = self.cutout.ratio;
        check(0.0 < lo && lo <= hi && hi <= 1.0, || format!("cutout.ratio ({lo}, {hi}) invalid"))?;

        let (lo, hi) = self.tia.points;
        check(2 <= lo && lo <= hi && hi <= 32, || format!("tia.points ({lo}, {hi}) invalid"))?;
        check(!self.tia.modes.is_empty(), || "tia.modes is empty".into())?;

        let (lo, hi) = self.gauss_noise.std;
        check(0.0 <= lo && lo <= hi && hi <= 128.0, || format!("gauss_noise.std ({lo}, {hi}) invalid"))?;

        let (lo, hi) = self.motion_blur.kernel;
        check(lo <= hi && lo >= 1 && hi <= 31, || format!("motion_blur.kernel ({lo}, {hi}) invalid"))?;
        check(lo % 2 == 1 && hi % 2 == 1, || format!("motion_blur.kernel ({lo}, {hi}) must be odd"))?;

        let (lo, hi) = self.color_jitter.factor;
        check(0.0 < lo && lo <= hi, || format!("color_jitter.factor ({lo}, {hi}) invalid"))?;
        let d = self.random_rotate.max_degrees;
        check((0.0..90.0).contains(&d), || format!("random_rotate.max_degrees {d} invalid"))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AugmentError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        text.parse()
    }
}

impl FromStr for AugmentConfig {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cfg: AugmentConfig = toml::from_str(s).map_err(|e| AugmentError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Result of one pipeline run.
#[derive(Clone, Debug, PartialEq)]
pub struct Augmented {
    pub image: ImageBuffer,
    /// Stages that actually ran, in order (always includes the resize).
    pub applied: Vec<Stage>,
    /// TIA was drawn but the image was too narrow for its points.
    pub tia_skipped: bool,
}

/// Runs the chain on one image. The output is a pure function of
/// `(img, cfg, seed)`; callers give each sample its own seed (see
/// [`crate::rng::derive_seed`]).
pub fn apply_pipeline(img: &ImageBuffer, cfg: &AugmentConfig, seed: u64) -> Result<Augmented, AugmentError> {
    cfg.validate()?;
    let mut image = img.clone();
    let mut applied = Vec::new();
    let mut tia_skipped = false;
    for stage in Stage::ORDER {
        let mut rng = Rng::stream(seed, &[stage as u64]);
        if stage != Stage::Resize && !rng.bernoulli(cfg.probability(stage)) {
            continue;
        }
        image = match stage {
            Stage::HeightCrop => random_height_crop(&image, &mut rng, cfg.height_crop.ratio_max),
            Stage::Cutout => cutout(&image, &mut rng, cfg.cutout.count, cfg.cutout.ratio),
            Stage::Tia => {
                let modes = &cfg.tia.modes;
                let mode = modes[rng.int_inclusive(0, modes.len() - 1)];
                let out = tia_distort(&image, &mut rng, cfg.tia.points, mode);
                tia_skipped = out.skipped_too_small;
                out.image
            }
            Stage::RandomRotate => random_rotate(&image, &mut rng, cfg.random_rotate.max_degrees),
            Stage::Resize => resize_to(&image, cfg.target_height, cfg.target_width, cfg.resize_policy),
            Stage::ColorJitter => color_jitter(&image, &mut rng, cfg.color_jitter.factor),
            Stage::PixelReverse => pixel_reverse(&image),
            Stage::GaussNoise => gauss_noise(&image, &mut rng, cfg.gauss_noise.std),
            Stage::MotionBlur => motion_blur(&image, &mut rng, cfg.motion_blur.kernel),
        };
        applied.push(stage);
    }
    Ok(Augmented {
        image,
        applied,
        tia_skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize) -> ImageBuffer {
        let data = (0..h * w).map(|i| ((i % w) * 5 + (i / w) * 13) as u8).collect();
        ImageBuffer::new(h, w, 1, data).unwrap()
    }

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = AugmentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back: AugmentConfig = text.parse().unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn reordering_is_rejected() {
        let mut cfg = AugmentConfig::default();
        cfg.order = Some(Stage::ORDER.to_vec());
        cfg.validate().unwrap();
        let mut order = Stage::ORDER.to_vec();
        order.swap(7, 8);
        cfg.order = Some(order);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn even_blur_kernel_is_rejected() {
        let mut cfg = AugmentConfig::default();
        cfg.motion_blur.kernel = (3, 6);
        assert!(cfg.validate().is_err());
        let mut cfg = AugmentConfig::default();
        cfg.version = 2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = AugmentConfig::default().to_toml() + "\nbogus = 1\n";
        assert!(text.parse::<AugmentConfig>().is_err());
    }

    #[test]
    fn disabled_pipeline_is_resize_only() {
        let img = textured(40, 200);
        let cfg = AugmentConfig::disabled(48, 480);
        let out = apply_pipeline(&img, &cfg, 9).unwrap();
        assert_eq!(out.applied, vec![Stage::Resize]);
        assert_eq!(out.image, resize_to(&img, 48, 480, ResizePolicy::PadRight));
    }

    #[test]
    fn zero_probability_is_resize_only() {
        let img = textured(40, 200);
        let mut cfg = AugmentConfig::default();
        cfg.set_probability(0.0);
        let out = apply_pipeline(&img, &cfg, 9).unwrap();
        assert_eq!(out.image, resize_to(&img, 48, 480, ResizePolicy::PadRight));
    }

    #[test]
    fn always_on_pipeline_hits_target_shape() {
        let img = textured(37, 151);
        let mut cfg = AugmentConfig::default();
        cfg.set_probability(1.0);
        for seed in 0..10 {
            let out = apply_pipeline(&img, &cfg, seed).unwrap();
            assert_eq!((out.image.height(), out.image.width(), out.image.channels()), (48, 480, 1));
            assert_eq!(out.applied.len(), 6);
        }
    }

    #[test]
    fn toggling_a_stage_keeps_other_draws() {
        // With noise disabled the earlier stages must produce the same
        // intermediate image; compare the runs with and without blur.
        let img = textured(30, 120);
        let mut a = AugmentConfig::default();
        a.set_probability(1.0);
        a.gauss_noise.enabled = false;
        let mut b = a.clone();
        b.motion_blur.enabled = false;
        let with_blur = apply_pipeline(&img, &a, 5).unwrap();
        let without = apply_pipeline(&img, &b, 5).unwrap();
        let mut rng = Rng::stream(5, &[Stage::MotionBlur as u64]);
        assert!(rng.bernoulli(1.0));
        let reblurred = motion_blur(&without.image, &mut rng, a.motion_blur.kernel);
        assert_eq!(reblurred, with_blur.image);
    }
}
