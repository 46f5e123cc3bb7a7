//! Connectionist temporal classification: the path-collapse mapping, the
//! loss with its gradient, decoders, and a brute-force oracle for small
//! instances.

mod decode;
mod loss;
mod oracle;

use std::io::{self, Read, Write};

use thiserror::Error;

pub use decode::{beam_search, beam_search_decode, greedy_decode, Beam};
pub use loss::{ctc_loss, CtcResult};
pub use oracle::{brute_force_loss, label_marginals, MAX_BRUTE_FORCE_PATHS};

/// Index of the blank symbol in every vocabulary.
pub const BLANK: usize = 0;

#[derive(Debug, Error, PartialEq)]
pub enum CtcError {
    #[error("malformed matrix: {0}")]
    Malformed(String),
    #[error("label index {index} at position {pos} outside [1, {vocab})")]
    BadLabel { pos: usize, index: usize, vocab: usize },
    #[error("instance too large for enumeration: {vocab}^{steps} paths")]
    TooLarge { steps: usize, vocab: usize },
    #[error("io: {0}")]
    Io(String),
}

/// `log(exp(a) + exp(b))`, exact for infinite arguments.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Merges adjacent duplicates, then drops blanks.
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != BLANK {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

/// Minimum number of frames a label needs: one per symbol plus a blank
/// between each pair of equal neighbours.
pub fn min_frames(label: &[usize]) -> usize {
    label.len() + label.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Row-normalized per-timestep log-probabilities, `steps × vocab`, blank at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct LogProbMatrix {
    steps: usize,
    vocab: usize,
    values: Vec<f64>,
}

const NORMALIZATION_TOL: f64 = 1e-6;

impl LogProbMatrix {
    /// Wraps log-probabilities, checking every row log-sum-exps to 0.
    pub fn new(steps: usize, vocab: usize, values: Vec<f64>) -> Result<Self, CtcError> {
        if steps == 0 || vocab < 2 {
            return Err(CtcError::Malformed(format!("shape {steps}x{vocab}")));
        }
        if values.len() != steps * vocab {
            return Err(CtcError::Malformed(format!(
                "{} values for {steps}x{vocab}",
                values.len()
            )));
        }
        for (t, row) in values.chunks_exact(vocab).enumerate() {
            if row.iter().any(|v| v.is_nan() || *v > NORMALIZATION_TOL) {
                return Err(CtcError::Malformed(format!("row {t} has NaN or positive entries")));
            }
            let z = logsumexp(row);
            if !(z.abs() <= NORMALIZATION_TOL) {
                return Err(CtcError::Malformed(format!("row {t} sums to exp({z})")));
            }
        }
        Ok(Self { steps, vocab, values })
    }

    /// Log-softmax of raw scores, row by row.
    pub fn from_logits(steps: usize, vocab: usize, logits: &[f64]) -> Result<Self, CtcError> {
        if steps == 0 || vocab < 2 || logits.len() != steps * vocab {
            return Err(CtcError::Malformed(format!(
                "{} logits for {steps}x{vocab}",
                logits.len()
            )));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(CtcError::Malformed("non-finite logit".into()));
        }
        let mut values = Vec::with_capacity(logits.len());
        for row in logits.chunks_exact(vocab) {
            let z = logsumexp(row);
            values.extend(row.iter().map(|x| (x - z).min(0.0)));
        }
        Ok(Self { steps, vocab, values })
    }

    /// From linear probabilities (each row must sum to 1).
    pub fn from_probs(steps: usize, vocab: usize, probs: &[f64]) -> Result<Self, CtcError> {
        Self::new(steps, vocab, probs.iter().map(|p| p.ln()).collect())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.vocab..(t + 1) * self.vocab]
    }

    #[inline]
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.vocab + k]
    }

    /// Index of the row maximum, ties to the lowest index.
    pub fn argmax(&self, t: usize) -> usize {
        let row = self.row(t);
        let mut best = 0;
        for (k, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = k;
            }
        }
        best
    }

    /// Little-endian binary: `u32 steps`, `u32 vocab`, then `steps·vocab`
    /// `f64` log-probabilities in row-major order.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.steps as u32).to_le_bytes())?;
        w.write_all(&(self.vocab as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.values.len() * 8);
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CtcError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| CtcError::Io(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CtcError> {
        if bytes.len() < 8 {
            return Err(CtcError::Malformed("truncated header".into()));
        }
        let steps = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let vocab = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let n = steps
            .checked_mul(vocab)
            .ok_or_else(|| CtcError::Malformed("shape overflow".into()))?;
        if bytes.len() != 8 + n * 8 {
            return Err(CtcError::Malformed(format!(
                "expected {} payload bytes for {steps}x{vocab}, found {}",
                n * 8,
                bytes.len() - 8
            )));
        }
        let values = bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(steps, vocab, values)
    }
}
