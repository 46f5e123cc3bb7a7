use serde::{Deserialize, Serialize};

use super::{train, TrainConfig, TrainError, TrainOutputs};
use crate::charset::Charset;
use crate::dataset::LoadedSample;
use crate::evalmetrics::{decode_text, DecodeMode};
use crate::imaging::resize_to;
use crate::network::{NetError, Network};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RungSize {
    Count(usize),
    /// Fraction of the corpus, rounded, at least one sample.
    Fraction(f64),
}

impl RungSize {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            RungSize::Count(c) => c,
            RungSize::Fraction(f) => ((f * n as f64).round() as usize).max(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub name: String,
    pub size: RungSize,
    /// Train accuracy that counts as a pass.
    pub threshold: f64,
    /// Mean train loss the final epoch must not exceed. The default `ln 2`
    /// means the labels average more than half the probability mass, so a
    /// lucky greedy decode of a diverging model does not count.
    #[serde(default = "default_max_loss")]
    pub max_loss: f64,
    pub max_iterations: usize,
}

pub fn default_max_loss() -> f64 {
    std::f64::consts::LN_2
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverfitPlan {
    pub rungs: Vec<Rung>,
}

impl OverfitPlan {
    /// Single image, one batch, 10% and the whole corpus.
    pub fn standard(batch_size: usize, max_iterations: usize) -> Self {
        let rung = |name: &str, size, threshold| Rung {
            name: name.into(),
            size,
            threshold,
            max_loss: default_max_loss(),
            max_iterations,
        };
        Self {
            rungs: vec![
                rung("single", RungSize::Count(1), 1.0),
                rung("batch", RungSize::Count(batch_size), 1.0),
                rung("10%", RungSize::Fraction(0.1), 1.0),
                rung("100%", RungSize::Fraction(1.0), 0.95),
            ],
        }
    }

    /// Resolved rung sizes; they must be strictly increasing and fit the
    /// corpus.
    pub fn resolve(&self, n: usize) -> Result<Vec<usize>, TrainError> {
        let sizes: Vec<usize> = self.rungs.iter().map(|r| r.size.resolve(n)).collect();
        for (i, &s) in sizes.iter().enumerate() {
            if s == 0 || s > n {
                return Err(TrainError::InvalidConfig(format!(
                    "rung {} needs {s} samples, corpus has {n}",
                    self.rungs[i].name
                )));
            }
            if i > 0 && s <= sizes[i - 1] {
                return Err(TrainError::InvalidConfig(format!(
                    "rung sizes must strictly increase: {} then {s}",
                    sizes[i - 1]
                )));
            }
        }
        Ok(sizes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungResult {
    pub name: String,
    pub size: usize,
    pub threshold: f64,
    pub passed: bool,
    pub iterations: usize,
    pub train_accuracy: f64,
    /// Mean train loss of the last epoch.
    pub final_loss: f64,
    /// Per-step mean batch loss.
    pub loss_curve: Vec<f64>,
    /// Up to five `(truth, prediction)` pairs from the rung's subset.
    pub sample_predictions: Vec<(String, String)>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverfitReport {
    pub rungs: Vec<RungResult>,
}

impl OverfitReport {
    pub fn all_passed(&self) -> bool {
        self.rungs.iter().all(|r| r.passed)
    }
}

/// Trains a fresh network on each rung's subset (the first `size` samples,
/// no augmentation) until its train accuracy reaches the threshold or the
/// iteration budget runs out. Stops at the first failing rung.
pub fn run_overfit_ladder(
    build: &dyn Fn() -> Result<Network, NetError>,
    data: &[LoadedSample],
    charset: &Charset,
    plan: &OverfitPlan,
    base: &TrainConfig,
) -> Result<OverfitReport, TrainError> {
    let sizes = plan.resolve(data.len())?;
    let mut report = OverfitReport::default();
    for (rung, size) in plan.rungs.iter().zip(sizes) {
        let subset = &data[..size];
        let mut cfg = base.clone();
        cfg.augment = false;
        cfg.batch_size = base.batch_size.min(size);
        let per_epoch = size.div_ceil(cfg.batch_size);
        cfg.total_epochs = rung.max_iterations.div_ceil(per_epoch).max(1);
        cfg.restart_period_epochs = cfg.restart_period_epochs.min(cfg.total_epochs as f64);
        cfg.max_iterations = Some(rung.max_iterations);
        cfg.train_eval_every = 1;
        cfg.stop_at_train_accuracy = Some(rung.threshold);
        cfg.stop_below_train_loss = Some(rung.max_loss);
        cfg.stop_at_val_accuracy = None;

        let mut result = RungResult {
            name: rung.name.clone(),
            size,
            threshold: rung.threshold,
            passed: false,
            iterations: 0,
            train_accuracy: 0.0,
            final_loss: f64::INFINITY,
            loss_curve: Vec::new(),
            sample_predictions: Vec::new(),
            error: None,
        };
        let run = build()
            .map_err(TrainError::from)
            .and_then(|mut net| train(&mut net, subset, &[], charset, &cfg, &TrainOutputs::default(), &mut |_| {}).map(|o| (net, o)));
        match run {
            Ok((net, outcome)) => {
                result.iterations = outcome.iterations;
                result.train_accuracy = outcome.last_train_accuracy().unwrap_or(0.0);
                result.final_loss = outcome.epochs.last().map_or(f64::INFINITY, |e| e.train_loss);
                result.passed = result.train_accuracy >= rung.threshold && result.final_loss <= rung.max_loss;
                result.loss_curve = outcome.step_losses;
                result.sample_predictions = sample_predictions(&net, subset, charset, &cfg);
            }
            Err(e) => result.error = Some(e.to_string()),
        }
        let passed = result.passed;
        report.rungs.push(result);
        if !passed {
            break;
        }
    }
    Ok(report)
}

fn sample_predictions(net: &Network, subset: &[LoadedSample], charset: &Charset, cfg: &TrainConfig) -> Vec<(String, String)> {
    let c = net.config();
    let take = &subset[..subset.len().min(5)];
    let images: Vec<_> = take
        .iter()
        .map(|s| resize_to(&s.image, c.input_height, c.input_width, cfg.resize_policy))
        .collect();
    match net.infer(&images) {
        Ok(logits) => take
            .iter()
            .zip(logits)
            .map(|(s, l)| {
                let pred = l
                    .log_probs()
                    .ok()
                    .and_then(|m| decode_text(&m, DecodeMode::Greedy, charset).ok())
                    .unwrap_or_default();
                (s.label.clone(), pred)
            })
            .collect(),
        Err(_) => Vec::new(),
    }
}
