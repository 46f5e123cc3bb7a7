use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{collapse, log_add, LogProbMatrix, BLANK};

/// Best-path decoding: per-frame argmax (ties to the lowest index), then
/// collapse.
pub fn greedy_decode(probs: &LogProbMatrix) -> Vec<usize> {
    let path: Vec<usize> = (0..probs.steps()).map(|t| probs.argmax(t)).collect();
    collapse(&path)
}

/// A label prefix with the mass of paths that produce it, split by whether
/// the last frame was blank.
#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    pub prefix: Vec<usize>,
    pub log_p_blank: f64,
    pub log_p_nonblank: f64,
}

impl Beam {
    pub fn total(&self) -> f64 {
        log_add(self.log_p_blank, self.log_p_nonblank)
    }
}

/// Higher total first; then shorter prefix; then lexicographic.
fn rank(a: &Beam, b: &Beam) -> Ordering {
    b.total()
        .partial_cmp(&a.total())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.prefix.len().cmp(&b.prefix.len()))
        .then_with(|| a.prefix.cmp(&b.prefix))
}

/// Prefix beam search. Returns the surviving beams after the last frame,
/// best first.
pub fn beam_search(probs: &LogProbMatrix, width: usize) -> Vec<Beam> {
    assert!(width >= 1, "beam width must be positive");
    let neg = f64::NEG_INFINITY;
    let mut beams = vec![Beam {
        prefix: Vec::new(),
        log_p_blank: 0.0,
        log_p_nonblank: neg,
    }];
    for t in 0..probs.steps() {
        let row = probs.row(t);
        let mut next: BTreeMap<Vec<usize>, (f64, f64)> = BTreeMap::new();
        for beam in &beams {
            let total = beam.total();
            let entry = next.entry(beam.prefix.clone()).or_insert((neg, neg));
            entry.0 = log_add(entry.0, total + row[BLANK]);

            let last = beam.prefix.last().copied();
            for (k, &lp) in row.iter().enumerate().skip(1) {
                if Some(k) == last {
                    // Repeating the last symbol without a blank stays on the
                    // same prefix; after a blank it extends it.
                    let same = next.entry(beam.prefix.clone()).or_insert((neg, neg));
                    same.1 = log_add(same.1, beam.log_p_nonblank + lp);
                    let mut ext = beam.prefix.clone();
                    ext.push(k);
                    let e = next.entry(ext).or_insert((neg, neg));
                    e.1 = log_add(e.1, beam.log_p_blank + lp);
                } else {
                    let mut ext = beam.prefix.clone();
                    ext.push(k);
                    let e = next.entry(ext).or_insert((neg, neg));
                    e.1 = log_add(e.1, total + lp);
                }
            }
        }
        let mut candidates: Vec<Beam> = next
            .into_iter()
            .filter(|(_, (b, nb))| *b > neg || *nb > neg)
            .map(|(prefix, (b, nb))| Beam {
                prefix,
                log_p_blank: b,
                log_p_nonblank: nb,
            })
            .collect();
        candidates.sort_by(rank);
        candidates.truncate(width);
        beams = candidates;
    }
    beams
}

/// Highest-probability label found by prefix beam search.
pub fn beam_search_decode(probs: &LogProbMatrix, width: usize) -> Vec<usize> {
    beam_search(probs, width)
        .into_iter()
        .next()
        .map(|b| b.prefix)
        .unwrap_or_default()
}
