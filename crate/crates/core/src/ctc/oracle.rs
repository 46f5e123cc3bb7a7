//! Exhaustive enumeration over all `vocab^steps` frame paths, in the linear
//! domain. Slow by construction; it exists to check the dynamic programs.

use std::collections::BTreeMap;

use super::{collapse, CtcError, LogProbMatrix};

/// Enumeration refuses instances with more paths than this.
pub const MAX_BRUTE_FORCE_PATHS: u64 = 1_000_000;

fn check_size(probs: &LogProbMatrix) -> Result<(), CtcError> {
    let (steps, vocab) = (probs.steps(), probs.vocab());
    let total = (vocab as u64).checked_pow(steps as u32);
    match total {
        Some(n) if n <= MAX_BRUTE_FORCE_PATHS => Ok(()),
        _ => Err(CtcError::TooLarge { steps, vocab }),
    }
}

/// Calls `f(path, probability)` for every frame-level path.
fn for_each_path(probs: &LogProbMatrix, mut f: impl FnMut(&[usize], f64)) {
    let (steps, vocab) = (probs.steps(), probs.vocab());
    let lin: Vec<f64> = probs.values().iter().map(|v| v.exp()).collect();
    let mut path = vec![0usize; steps];
    loop {
        let p: f64 = path.iter().enumerate().map(|(t, &k)| lin[t * vocab + k]).product();
        f(&path, p);
        // Odometer increment.
        let mut t = steps;
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            path[t] += 1;
            if path[t] < vocab {
                break;
            }
            path[t] = 0;
        }
    }
}

/// `-ln` of the summed probability of every path collapsing to `label`.
pub fn brute_force_loss(probs: &LogProbMatrix, label: &[usize]) -> Result<f64, CtcError> {
    check_size(probs)?;
    let mut total = 0.0;
    for_each_path(probs, |path, p| {
        if collapse(path) == label {
            total += p;
        }
    });
    Ok(-total.ln())
}

/// Probability mass of every label reachable from the matrix.
pub fn label_marginals(probs: &LogProbMatrix) -> Result<BTreeMap<Vec<usize>, f64>, CtcError> {
    check_size(probs)?;
    let mut out = BTreeMap::new();
    for_each_path(probs, |path, p| {
        *out.entry(collapse(path)).or_insert(0.0) += p;
    });
    Ok(out)
}
