//! Training loop: mean-reduced CTC loss, Adam with head-only decoupled
//! weight decay, cosine annealing with warm restarts, optional multi-scale
//! batches, and the over-fit ladder.

mod adam;
mod overfit;
mod schedule;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamError, AdamSettings, AdamState, WeightDecay};
pub use overfit::{run_overfit_ladder, OverfitPlan, OverfitReport, Rung, RungResult, RungSize};
pub use schedule::lr_at;

use crate::augment::{apply_pipeline, AugmentConfig, AugmentError};
use crate::charset::Charset;
use crate::ctc::{ctc_loss, min_frames, CtcError};
use crate::dataset::LoadedSample;
use crate::evalmetrics::{greedy_accuracy, EvalError};
use crate::imaging::{resize_to, ImageBuffer, ResizePolicy};
use crate::network::{save_checkpoint, Mode, NetError, Network};
use crate::rng::{derive_seed, Rng};

const SHUFFLE_STREAM: u64 = 0x5401;
const AUGMENT_STREAM: u64 = 0xa060;
const DROPOUT_STREAM: u64 = 0xd409;
const SCALE_STREAM: u64 = 0x5ca1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("charset has {charset} symbols but the network emits {net}")]
    VocabMismatch { charset: usize, net: usize },
    #[error("no trainable samples")]
    NoSamples,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ctc(#[from] CtcError),
    #[error(transparent)]
    Adam(#[from] AdamError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiScale {
    pub scales: Vec<(usize, usize)>,
    /// Iterations between scale draws.
    pub switch_every: usize,
}

impl Default for MultiScale {
    fn default() -> Self {
        Self {
            scales: vec![(32, 320), (48, 480), (64, 640)],
            switch_every: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub restart_period_epochs: f64,
    pub total_epochs: usize,
    pub batch_size: usize,
    /// Decoupled decay on the head; backbone and neck are never decayed.
    pub weight_decay_head: f64,
    pub adam: AdamSettings,
    pub multi_scale: Option<MultiScale>,
    pub seed: u64,
    /// Run the augmentation chain on training batches.
    pub augment: bool,
    pub augmentation: AugmentConfig,
    /// Resize policy when augmentation is off and for accuracy passes.
    pub resize_policy: ResizePolicy,
    /// Hard cap on optimizer steps.
    pub max_iterations: Option<usize>,
    /// Epochs between clean train-set accuracy passes; 0 disables them.
    pub train_eval_every: usize,
    /// Stop once clean train accuracy reaches this value.
    pub stop_at_train_accuracy: Option<f64>,
    /// Additionally require the epoch's mean train loss to be at most this
    /// before the train-accuracy stop applies.
    pub stop_below_train_loss: Option<f64>,
    /// Stop once validation accuracy reaches this value.
    pub stop_at_val_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 2e-3,
            restart_period_epochs: 50.0,
            total_epochs: 2000,
            batch_size: 8,
            weight_decay_head: 4e-5,
            adam: AdamSettings::default(),
            multi_scale: None,
            seed: 42,
            augment: true,
            augmentation: AugmentConfig::default(),
            resize_policy: ResizePolicy::PadRight,
            max_iterations: None,
            train_eval_every: 1,
            stop_at_train_accuracy: None,
            stop_below_train_loss: None,
            stop_at_val_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, net: &Network) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad(format!("initial_lr must be positive, got {}", self.initial_lr));
        }
        if !(self.restart_period_epochs > 0.0) || self.restart_period_epochs > self.total_epochs as f64 {
            return bad(format!(
                "restart period {} must be in (0, total_epochs = {}]",
                self.restart_period_epochs, self.total_epochs
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.weight_decay_head < 0.0 {
            return bad("weight_decay_head must be non-negative".into());
        }
        if let Some(ms) = &self.multi_scale {
            if ms.scales.is_empty() || ms.switch_every == 0 {
                return bad("multi_scale needs at least one scale and switch_every >= 1".into());
            }
            for &(h, w) in &ms.scales {
                if !net.config().accepts_scale(h, w) {
                    return bad(format!("scale {h}x{w} is incompatible with the stride plan"));
                }
            }
        }
        self.augmentation.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        text.parse()
    }

    fn decay(&self) -> WeightDecay {
        WeightDecay::head_only(self.weight_decay_head)
    }
}

impl std::str::FromStr for TrainConfig {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        toml::from_str(s).map_err(|e| TrainError::Parse(e.to_string()))
    }
}

/// One line of `metrics.jsonl`. Contains no wall-clock values so equal
/// seeds give byte-identical logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub iterations: usize,
    pub lr: f64,
    /// Mean of the per-batch mean losses.
    pub train_loss: f64,
    pub train_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
    /// Samples skipped because their label needs more frames than the
    /// network emits at the batch's scale (or contains unknown characters).
    pub skipped_infeasible: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochMetrics>,
    /// Mean loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
    pub iterations: usize,
    pub best_val_accuracy: Option<f64>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn last_train_accuracy(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.train_accuracy)
    }

    pub fn last_val_accuracy(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.val_accuracy)
    }
}

/// Where to write artifacts. Every field is optional so in-memory runs
/// (tests, the over-fit ladder) skip the filesystem.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    pub dir: Option<PathBuf>,
}

impl TrainOutputs {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }
}

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const RESOLVED_CONFIG: &str = "train-config.toml";
pub const NET_CONFIG: &str = "net-config.json";

fn scale_for(cfg: &TrainConfig, net: &Network, iteration: usize) -> (usize, usize) {
    match &cfg.multi_scale {
        Some(ms) => {
            let window = (iteration / ms.switch_every) as u64;
            let mut rng = Rng::stream(cfg.seed, &[SCALE_STREAM, window]);
            ms.scales[rng.int_inclusive(0, ms.scales.len() - 1)]
        }
        None => (net.config().input_height, net.config().input_width),
    }
}

fn clean_inputs(net: &Network, samples: &[LoadedSample], policy: ResizePolicy) -> (Vec<ImageBuffer>, Vec<String>) {
    let c = net.config();
    let images = samples
        .par_iter()
        .map(|s| resize_to(&s.image, c.input_height, c.input_width, policy))
        .collect();
    (images, samples.iter().map(|s| s.label.clone()).collect())
}

/// Trains `net` in place. `observer` sees every epoch's metrics as they are
/// produced.
pub fn train(
    net: &mut Network,
    train_set: &[LoadedSample],
    val_set: &[LoadedSample],
    charset: &Charset,
    cfg: &TrainConfig,
    outputs: &TrainOutputs,
    observer: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate(net)?;
    if charset.vocab_size() != net.config().vocab {
        return Err(TrainError::VocabMismatch {
            charset: charset.vocab_size(),
            net: net.config().vocab,
        });
    }
    if train_set.is_empty() {
        return Err(TrainError::NoSamples);
    }
    let mut metrics_file = match &outputs.dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let p = dir.join(RESOLVED_CONFIG);
            fs::write(&p, cfg.to_toml()).map_err(io_err(&p))?;
            let p = dir.join(NET_CONFIG);
            let net_json = serde_json::to_string_pretty(net.config()).expect("net config serializes");
            fs::write(&p, net_json + "\n").map_err(io_err(&p))?;
            let p = dir.join(METRICS_FILE);
            Some((fs::File::create(&p).map_err(io_err(&p))?, p))
        }
        None => None,
    };

    let (train_clean, train_labels) = clean_inputs(net, train_set, cfg.resize_policy);
    let (val_clean, val_labels) = clean_inputs(net, val_set, cfg.resize_policy);
    let mut state = AdamState::new(net.params());
    let decay = cfg.decay();
    let batches_per_epoch = train_set.len().div_ceil(cfg.batch_size);
    let mut outcome = TrainOutcome {
        epochs: Vec::new(),
        step_losses: Vec::new(),
        iterations: 0,
        best_val_accuracy: None,
        stopped_early: false,
    };
    let mut best_score = f64::NEG_INFINITY;
    let mut lr = cfg.initial_lr;

    'epochs: for epoch in 0..cfg.total_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        Rng::stream(cfg.seed, &[SHUFFLE_STREAM, epoch as u64]).shuffle(&mut order);
        let mut skipped = 0;
        let mut loss_sum = 0.0;
        let mut loss_batches = 0usize;
        let mut hit_cap = false;

        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if cfg.max_iterations.is_some_and(|m| outcome.iterations >= m) {
                hit_cap = true;
                break;
            }
            let (h, w) = scale_for(cfg, net, outcome.iterations);
            let steps = net.config().output_steps_for(w);
            let usable: Vec<usize> = chunk
                .iter()
                .copied()
                .filter(|&i| train_set[i].target.as_ref().is_some_and(|t| min_frames(t) <= steps))
                .collect();
            skipped += chunk.len() - usable.len();
            if usable.is_empty() {
                continue;
            }
            let images: Vec<ImageBuffer> = usable
                .par_iter()
                .map(|&i| {
                    let s = &train_set[i];
                    if cfg.augment {
                        let mut aug = cfg.augmentation.clone();
                        aug.target_height = h;
                        aug.target_width = w;
                        let seed = derive_seed(cfg.seed, &[AUGMENT_STREAM, epoch as u64, i as u64]);
                        apply_pipeline(&s.image, &aug, seed).map(|a| a.image)
                    } else {
                        Ok(resize_to(&s.image, h, w, cfg.resize_policy))
                    }
                })
                .collect::<Result<_, _>>()?;

            net.reseed_dropout(derive_seed(cfg.seed, &[DROPOUT_STREAM, outcome.iterations as u64]));
            let logits = net.forward_multiscale(&images, Mode::Train)?;
            let n = usable.len() as f64;
            let results: Vec<_> = logits
                .par_iter()
                .zip(usable.par_iter())
                .map(|(l, &i)| -> Result<_, CtcError> {
                    let lp = l.log_probs()?;
                    ctc_loss(&lp, train_set[i].target.as_deref().unwrap_or(&[]))
                })
                .collect::<Result<_, _>>()?;
            let mut batch_loss = 0.0;
            let upstream: Vec<Vec<f64>> = results
                .into_iter()
                .map(|r| {
                    batch_loss += r.loss / n;
                    r.grad.into_iter().map(|g| g / n).collect()
                })
                .collect();
            let grads = net.backward(&upstream)?;
            let epoch_pos = epoch as f64 + b as f64 / batches_per_epoch as f64;
            lr = lr_at(cfg.initial_lr, cfg.restart_period_epochs, epoch_pos);
            adam_step(net.params_mut(), &grads, &mut state, lr, &cfg.adam, &decay)?;
            outcome.iterations += 1;
            outcome.step_losses.push(batch_loss);
            loss_sum += batch_loss;
            loss_batches += 1;
        }

        let last_epoch = epoch + 1 == cfg.total_epochs;
        let cap_reached = hit_cap || cfg.max_iterations.is_some_and(|m| outcome.iterations >= m);
        let eval_train = cfg.train_eval_every > 0 && ((epoch + 1) % cfg.train_eval_every == 0 || last_epoch || cap_reached);
        let train_accuracy = if eval_train {
            Some(greedy_accuracy(net, &train_clean, &train_labels, charset)?)
        } else {
            None
        };
        let val_accuracy = if val_clean.is_empty() {
            None
        } else {
            Some(greedy_accuracy(net, &val_clean, &val_labels, charset)?)
        };
        let m = EpochMetrics {
            epoch,
            iterations: outcome.iterations,
            lr,
            train_loss: if loss_batches == 0 { 0.0 } else { loss_sum / loss_batches as f64 },
            train_accuracy,
            val_accuracy,
            skipped_infeasible: skipped,
        };
        observer(&m);
        if let Some((file, path)) = metrics_file.as_mut() {
            let line = serde_json::to_string(&m).expect("metrics serialize");
            writeln!(file, "{line}").map_err(io_err(path))?;
            file.flush().map_err(io_err(path))?;
        }

        // Best checkpoint tracks validation accuracy, falling back to train
        // accuracy when there is no validation split.
        if let Some(score) = val_accuracy.or(train_accuracy) {
            if val_accuracy.is_some() {
                outcome.best_val_accuracy = Some(outcome.best_val_accuracy.map_or(score, |b: f64| b.max(score)));
            }
            if score > best_score {
                best_score = score;
                if let Some(dir) = &outputs.dir {
                    save_checkpoint(net, &dir.join(BEST_CHECKPOINT))?;
                }
            }
        }
        let epoch_loss = m.train_loss;
        outcome.epochs.push(m);

        let reached = |acc: Option<f64>, goal: Option<f64>| matches!((acc, goal), (Some(a), Some(g)) if a >= g);
        let loss_ok = cfg.stop_below_train_loss.is_none_or(|l| epoch_loss <= l);
        if (loss_ok && reached(train_accuracy, cfg.stop_at_train_accuracy)) || reached(val_accuracy, cfg.stop_at_val_accuracy) {
            outcome.stopped_early = !last_epoch;
            break 'epochs;
        }
        if cap_reached {
            break;
        }
    }

    if let Some(dir) = &outputs.dir {
        save_checkpoint(net, &dir.join(LAST_CHECKPOINT))?;
        if best_score == f64::NEG_INFINITY {
            save_checkpoint(net, &dir.join(BEST_CHECKPOINT))?;
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests;
