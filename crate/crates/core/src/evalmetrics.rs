//! Space-insensitive exact-match accuracy, evaluation reports and
//! multi-scale test-time augmentation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charset::{strip_spaces, Charset};
use crate::ctc::{beam_search_decode, greedy_decode, CtcError, LogProbMatrix};
use crate::dataset::{LoadFailure, LoadedSample};
use crate::imaging::{resize_to, ImageBuffer, ResizePolicy};
use crate::network::{NetError, Network};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty eval set")]
    Empty,
    #[error("no TTA scales given")]
    NoScales,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ctc(#[from] CtcError),
}

/// 1 when the texts match exactly after removing spaces, else 0.
pub fn sequence_accuracy(pred: &str, truth: &str) -> u8 {
    u8::from(strip_spaces(pred) == strip_spaces(truth))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Beam { width: usize },
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeMode::Greedy => f.write_str("greedy"),
            DecodeMode::Beam { width } => write!(f, "beam({width})"),
        }
    }
}

/// Decodes a matrix to text. Indices come from the matrix' own vocabulary,
/// which must match the charset.
pub fn decode_text(probs: &LogProbMatrix, mode: DecodeMode, charset: &Charset) -> Result<String, CharsetMismatch> {
    let indices = match mode {
        DecodeMode::Greedy => greedy_decode(probs),
        DecodeMode::Beam { width } => beam_search_decode(probs, width.max(1)),
    };
    charset.decode_indices(&indices).map_err(|_| CharsetMismatch)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("decoded index outside the charset")]
pub struct CharsetMismatch;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBucket {
    pub samples: usize,
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub path: String,
    pub truth: String,
    pub pred: String,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub decode_mode: DecodeMode,
    /// Set when predictions came from multi-scale decoding.
    #[serde(default)]
    pub tta: Option<TtaStrategy>,
    pub n_samples: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    /// Keyed by space-stripped truth length.
    pub per_length: BTreeMap<usize, LengthBucket>,
    /// Samples whose image could not be read; counted as incorrect.
    pub unreadable: Vec<String>,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    fn from_predictions(mode: DecodeMode, predictions: Vec<Prediction>, unreadable: Vec<String>) -> Self {
        let mut per_length: BTreeMap<usize, LengthBucket> = BTreeMap::new();
        for p in &predictions {
            let b = per_length.entry(p.truth.chars().count()).or_default();
            b.samples += 1;
            b.correct += usize::from(p.correct);
        }
        let n_samples = predictions.len();
        let n_correct = predictions.iter().filter(|p| p.correct).count();
        Self {
            decode_mode: mode,
            tta: None,
            n_samples,
            n_correct,
            accuracy: if n_samples == 0 { 0.0 } else { n_correct as f64 / n_samples as f64 },
            per_length,
            unreadable,
            predictions,
        }
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let tta = self.tta.map(|t| format!(" + tta {t}")).unwrap_or_default();
        let mut s = format!(
            "decode {}{tta}: {}/{} correct, accuracy {:.4}\n",
            self.decode_mode, self.n_correct, self.n_samples, self.accuracy
        );
        s.push_str("length  samples  correct  accuracy\n");
        for (len, b) in &self.per_length {
            let acc = if b.samples == 0 { 0.0 } else { b.correct as f64 / b.samples as f64 };
            s.push_str(&format!("{len:>6}  {:>7}  {:>7}  {acc:>8.4}\n", b.samples, b.correct));
        }
        if !self.unreadable.is_empty() {
            s.push_str(&format!("unreadable: {}\n", self.unreadable.len()));
        }
        s
    }
}

/// Resizes every sample to the network's configured input.
pub fn prepare_images(net: &Network, samples: &[LoadedSample], policy: ResizePolicy) -> Vec<ImageBuffer> {
    let c = net.config();
    samples
        .iter()
        .map(|s| resize_to(&s.image, c.input_height, c.input_width, policy))
        .collect()
}

/// Evaluates under each decode mode. Logits are computed once per sample
/// and decoded once per mode; reports come back in `modes` order.
pub fn evaluate(
    net: &Network,
    samples: &[LoadedSample],
    failures: &[LoadFailure],
    charset: &Charset,
    modes: &[DecodeMode],
    policy: ResizePolicy,
) -> Result<Vec<EvalReport>, EvalError> {
    if samples.is_empty() && failures.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut matrices = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(64) {
        let images = prepare_images(net, chunk, policy);
        for l in net.infer(&images)? {
            matrices.push(l.log_probs()?);
        }
    }
    Ok(modes
        .iter()
        .map(|&mode| {
            let mut preds: Vec<Prediction> = samples
                .iter()
                .zip(&matrices)
                .map(|(s, m)| {
                    let pred = decode_text(m, mode, charset).unwrap_or_default();
                    Prediction {
                        path: s.rel.clone(),
                        correct: sequence_accuracy(&pred, &s.label) == 1,
                        truth: s.label.clone(),
                        pred,
                    }
                })
                .collect();
            preds.extend(failure_predictions(failures));
            let unreadable = failures.iter().map(|f| f.rel.clone()).collect();
            EvalReport::from_predictions(mode, preds, unreadable)
        })
        .collect())
}

fn failure_predictions(failures: &[LoadFailure]) -> impl Iterator<Item = Prediction> + '_ {
    failures.iter().map(|f| Prediction {
        path: f.rel.clone(),
        truth: strip_spaces(&f.label),
        pred: String::new(),
        correct: false,
    })
}

/// Like [`evaluate`] with every sample decoded by [`tta_decode`].
#[allow(clippy::too_many_arguments)]
pub fn evaluate_tta(
    net: &Network,
    samples: &[LoadedSample],
    failures: &[LoadFailure],
    charset: &Charset,
    scales: &[(usize, usize)],
    strategy: TtaStrategy,
    mode: DecodeMode,
    policy: ResizePolicy,
) -> Result<EvalReport, EvalError> {
    if samples.is_empty() && failures.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut preds = Vec::with_capacity(samples.len() + failures.len());
    for s in samples {
        let pred = tta_decode(net, &s.image, scales, strategy, mode, charset, policy)?;
        preds.push(Prediction {
            path: s.rel.clone(),
            correct: sequence_accuracy(&pred, &s.label) == 1,
            truth: s.label.clone(),
            pred,
        });
    }
    preds.extend(failure_predictions(failures));
    let mut report = EvalReport::from_predictions(mode, preds, failures.iter().map(|f| f.rel.clone()).collect());
    report.tta = Some(strategy);
    Ok(report)
}

/// TSV lines `path<TAB>truth<TAB>pred<TAB>correct`.
pub fn predictions_tsv(report: &EvalReport) -> String {
    let mut s = String::new();
    for p in &report.predictions {
        s.push_str(&format!("{}\t{}\t{}\t{}\n", p.path, p.truth, p.pred, u8::from(p.correct)));
    }
    s
}

/// Exact-match accuracy of greedy decoding over already-sized images.
pub fn greedy_accuracy(net: &Network, images: &[ImageBuffer], labels: &[String], charset: &Charset) -> Result<f64, EvalError> {
    if images.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut correct = 0usize;
    for (chunk, labs) in images.chunks(64).zip(labels.chunks(64)) {
        for (l, truth) in net.infer_multiscale(chunk)?.iter().zip(labs) {
            let pred = decode_text(&l.log_probs()?, DecodeMode::Greedy, charset).unwrap_or_default();
            correct += usize::from(sequence_accuracy(&pred, truth));
        }
    }
    Ok(correct as f64 / images.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TtaStrategy {
    /// Decode each scale; keep the prediction with the highest mean
    /// per-step max log-probability.
    BestScore,
    /// Resample every scale's distributions to the middle scale's step
    /// count, average the probabilities, decode once.
    AvgProb,
}

impl fmt::Display for TtaStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TtaStrategy::BestScore => "best-score",
            TtaStrategy::AvgProb => "avg-prob",
        })
    }
}

pub const DEFAULT_TTA_SCALES: [(usize, usize); 3] = [(32, 320), (48, 480), (64, 640)];

/// Mean over steps of the row maximum.
pub fn path_score(m: &LogProbMatrix) -> f64 {
    (0..m.steps()).map(|t| m.get(t, m.argmax(t))).sum::<f64>() / m.steps() as f64
}

/// Nearest-step resampling of a matrix to `steps` rows.
pub fn resample_steps(m: &LogProbMatrix, steps: usize) -> Vec<f64> {
    let v = m.vocab();
    let mut out = Vec::with_capacity(steps * v);
    for t in 0..steps {
        let src = (((t as f64 + 0.5) * m.steps() as f64 / steps as f64).floor() as usize).min(m.steps() - 1);
        out.extend_from_slice(m.row(src));
    }
    out
}

/// Probability average of several matrices after resampling to `steps`.
pub fn average_probs(mats: &[LogProbMatrix], steps: usize) -> Result<LogProbMatrix, CtcError> {
    let v = mats[0].vocab();
    let mut acc = vec![0.0; steps * v];
    for m in mats {
        for (a, lp) in acc.iter_mut().zip(resample_steps(m, steps)) {
            *a += lp.exp();
        }
    }
    let n = mats.len() as f64;
    let logs: Vec<f64> = acc.iter().map(|p| (p / n).ln()).collect();
    // Renormalize away rounding so rows log-sum-exp to exactly ~0.
    LogProbMatrix::from_logits(steps, v, &logs)
}

/// Multi-scale decoding of one native-size image.
pub fn tta_decode(
    net: &Network,
    image: &ImageBuffer,
    scales: &[(usize, usize)],
    strategy: TtaStrategy,
    mode: DecodeMode,
    charset: &Charset,
    policy: ResizePolicy,
) -> Result<String, EvalError> {
    if scales.is_empty() {
        return Err(EvalError::NoScales);
    }
    let image = image.with_channels(net.config().input_channels);
    let inputs: Vec<ImageBuffer> = scales.iter().map(|&(h, w)| resize_to(&image, h, w, policy)).collect();
    let mats: Vec<LogProbMatrix> = net
        .infer_multiscale(&inputs)?
        .iter()
        .map(|l| l.log_probs())
        .collect::<Result<_, _>>()?;
    let chosen = match strategy {
        TtaStrategy::BestScore => {
            let mut best = 0;
            for (i, m) in mats.iter().enumerate().skip(1) {
                if path_score(m) > path_score(&mats[best]) {
                    best = i;
                }
            }
            mats[best].clone()
        }
        TtaStrategy::AvgProb => {
            if mats.len() == 1 {
                mats[0].clone()
            } else {
                average_probs(&mats, mats[mats.len() / 2].steps())?
            }
        }
    };
    Ok(decode_text(&chosen, mode, charset).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetConfig;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(sequence_accuracy("ab", "a b"), 1);
        assert_eq!(sequence_accuracy("ab", "ab"), 1);
        assert_eq!(sequence_accuracy("ab", "ba"), 0);
        assert_eq!(sequence_accuracy("", "  "), 1);
    }

    proptest! {
        #[test]
        fn stripping_is_idempotent(pred in "[ab ]{0,6}", truth in "[ab ]{0,6}") {
            prop_assert_eq!(
                sequence_accuracy(&pred, &truth),
                sequence_accuracy(&strip_spaces(&pred), &strip_spaces(&truth))
            );
        }
    }

    fn tiny_setup() -> (Network, Charset) {
        let charset = Charset::from_chars("abc".chars());
        let mut cfg = NetConfig::tiny(charset.vocab_size());
        cfg.input_height = 8;
        cfg.input_width = 16;
        (Network::build(cfg).unwrap(), charset)
    }

    #[test]
    fn empty_eval_set() {
        let (net, cs) = tiny_setup();
        let err = evaluate(&net, &[], &[], &cs, &[DecodeMode::Greedy], ResizePolicy::PadRight).unwrap_err();
        assert_eq!(err.to_string(), "empty eval set");
    }

    #[test]
    fn reports_share_logits_and_partition_lengths() {
        let (net, cs) = tiny_setup();
        let samples: Vec<LoadedSample> = (0..5)
            .map(|i| LoadedSample::new(format!("{i}.pgm"), ImageBuffer::filled(8, 16 + i, 1, (i * 40) as u8), &"ab c"[..1 + i % 4], &cs))
            .collect();
        let failures = vec![LoadFailure {
            rel: "bad.pgm".into(),
            label: "a".into(),
            error: "truncated".into(),
        }];
        let modes = [DecodeMode::Greedy, DecodeMode::Beam { width: 8 }];
        let reports = evaluate(&net, &samples, &failures, &cs, &modes, ResizePolicy::PadRight).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.n_samples, 6);
            assert_eq!(r.per_length.values().map(|b| b.samples).sum::<usize>(), 6);
            assert_eq!(r.accuracy, r.n_correct as f64 / r.n_samples as f64);
            assert_eq!(r.unreadable, vec!["bad.pgm".to_string()]);
            assert!(!r.predictions.last().unwrap().correct);
        }
        let again = evaluate(&net, &samples, &failures, &cs, &modes, ResizePolicy::PadRight).unwrap();
        assert_eq!(reports, again);
    }

    #[test]
    fn tta_single_scale_equals_plain_decode() {
        let (net, cs) = tiny_setup();
        let img = ImageBuffer::new(8, 16, 1, (0..128).map(|i| (i * 7 % 256) as u8).collect()).unwrap();
        let plain = {
            let l = net.infer(std::slice::from_ref(&img)).unwrap();
            decode_text(&l[0].log_probs().unwrap(), DecodeMode::Greedy, &cs).unwrap()
        };
        for strategy in [TtaStrategy::BestScore, TtaStrategy::AvgProb] {
            let t = tta_decode(&net, &img, &[(8, 16)], strategy, DecodeMode::Greedy, &cs, ResizePolicy::PadRight).unwrap();
            assert_eq!(t, plain);
        }
        // Repeating one scale gives identical logits at every "scale".
        for strategy in [TtaStrategy::BestScore, TtaStrategy::AvgProb] {
            let t = tta_decode(&net, &img, &[(8, 16); 3], strategy, DecodeMode::Greedy, &cs, ResizePolicy::PadRight).unwrap();
            assert_eq!(t, plain);
        }
    }

    #[test]
    fn tta_rejects_incompatible_scale() {
        let (net, cs) = tiny_setup();
        let img = ImageBuffer::filled(8, 16, 1, 0);
        assert!(tta_decode(&net, &img, &[(10, 16)], TtaStrategy::BestScore, DecodeMode::Greedy, &cs, ResizePolicy::Stretch).is_err());
        assert!(matches!(
            tta_decode(&net, &img, &[], TtaStrategy::BestScore, DecodeMode::Greedy, &cs, ResizePolicy::Stretch),
            Err(EvalError::NoScales)
        ));
    }

    #[test]
    fn default_scales() {
        assert_eq!(DEFAULT_TTA_SCALES, [(32, 320), (48, 480), (64, 640)]);
    }

    #[test]
    fn resample_to_same_length_is_identity() {
        let m = LogProbMatrix::from_logits(3, 2, &[0.0, 1.0, 2.0, 0.0, 0.5, 0.5]).unwrap();
        assert_eq!(resample_steps(&m, 3), m.values());
        assert_eq!(resample_steps(&m, 6).len(), 12);
    }
}
