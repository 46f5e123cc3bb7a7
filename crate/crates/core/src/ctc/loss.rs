use super::{log_add, min_frames, CtcError, LogProbMatrix, BLANK};

/// Per-sample CTC loss and its gradient with respect to the pre-softmax
/// logits that produced the matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CtcResult {
    /// `-ln p(label | input)`; `+inf` when the label cannot be emitted.
    pub loss: f64,
    /// `false` when the label needs more frames than the matrix has.
    pub feasible: bool,
    /// Row-major `steps × vocab`; each row sums to zero.
    pub grad: Vec<f64>,
}

/// Blank-interleaved label `[b, l1, b, l2, ..., lL, b]`.
fn extend(label: &[usize]) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * label.len() + 1);
    ext.push(BLANK);
    for &k in label {
        ext.push(k);
        ext.push(BLANK);
    }
    ext
}

/// Whether position `s` of the extended label may be entered from `s - 2`.
#[inline]
fn can_skip(ext: &[usize], s: usize) -> bool {
    s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2]
}

/// Forward-backward over the extended label in log space.
///
/// `alpha[t][s]` is the log mass of path prefixes through `t` ending at `s`
/// (emissions `0..=t` included); `beta[t][s]` is the log mass of completing
/// the label from `s` at `t` using emissions `t+1..`, so that
/// `alpha[t][s] + beta[t][s]` is the mass of all full paths visiting `s` at
/// `t`.
pub fn ctc_loss(probs: &LogProbMatrix, label: &[usize]) -> Result<CtcResult, CtcError> {
    let (steps, vocab) = (probs.steps(), probs.vocab());
    for (pos, &index) in label.iter().enumerate() {
        if index == BLANK || index >= vocab {
            return Err(CtcError::BadLabel { pos, index, vocab });
        }
    }
    if min_frames(label) > steps {
        return Ok(CtcResult {
            loss: f64::INFINITY,
            feasible: false,
            grad: vec![0.0; steps * vocab],
        });
    }

    let ext = extend(label);
    let n = ext.len();
    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; steps * n];
    let mut beta = vec![neg; steps * n];

    alpha[0] = probs.get(0, ext[0]);
    if n > 1 {
        alpha[1] = probs.get(0, ext[1]);
    }
    for t in 1..steps {
        let (prev, cur) = alpha.split_at_mut(t * n);
        let prev = &prev[(t - 1) * n..];
        let cur = &mut cur[..n];
        for s in 0..n {
            let mut a = prev[s];
            if s >= 1 {
                a = log_add(a, prev[s - 1]);
            }
            if can_skip(&ext, s) {
                a = log_add(a, prev[s - 2]);
            }
            cur[s] = a + probs.get(t, ext[s]);
        }
    }

    let last = (steps - 1) * n;
    beta[last + n - 1] = 0.0;
    if n > 1 {
        beta[last + n - 2] = 0.0;
    }
    for t in (0..steps - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * n);
        let cur = &mut cur[t * n..];
        let next = &next[..n];
        for s in 0..n {
            let mut b = next[s] + probs.get(t + 1, ext[s]);
            if s + 1 < n {
                b = log_add(b, next[s + 1] + probs.get(t + 1, ext[s + 1]));
            }
            if s + 2 < n && can_skip(&ext, s + 2) {
                b = log_add(b, next[s + 2] + probs.get(t + 1, ext[s + 2]));
            }
            cur[s] = b;
        }
    }

    let mut log_p = alpha[last + n - 1];
    if n > 1 {
        log_p = log_add(log_p, alpha[last + n - 2]);
    }
    if log_p == neg {
        // Every feasible path has zero probability.
        return Ok(CtcResult {
            loss: f64::INFINITY,
            feasible: true,
            grad: vec![0.0; steps * vocab],
        });
    }

    // d loss / d logit[t][k] = y[t][k] - (1/P) sum_{s: ext[s]=k} alpha beta.
    let mut grad = vec![0.0; steps * vocab];
    for t in 0..steps {
        let g = &mut grad[t * vocab..(t + 1) * vocab];
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = probs.get(t, k).exp();
        }
        for s in 0..n {
            let ab = alpha[t * n + s] + beta[t * n + s];
            if ab != neg {
                g[ext[s]] -= (ab - log_p).exp();
            }
        }
    }

    Ok(CtcResult {
        loss: -log_p,
        feasible: true,
        grad,
    })
}
