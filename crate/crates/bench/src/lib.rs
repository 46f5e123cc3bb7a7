//! Deterministic inputs shared by the benchmarks.

use tinyrec::ctc::LogProbMatrix;
use tinyrec::imaging::ImageBuffer;
use tinyrec::rng::Rng;

/// Random normalized `steps × vocab` matrix.
pub fn random_matrix(steps: usize, vocab: usize, seed: u64) -> LogProbMatrix {
    let mut rng = Rng::new(seed);
    let logits: Vec<f64> = (0..steps * vocab).map(|_| rng.uniform(-3.0, 3.0)).collect();
    LogProbMatrix::from_logits(steps, vocab, &logits).expect("finite logits")
}

/// Label of `len` non-blank indices below `vocab`.
pub fn random_label(len: usize, vocab: usize, seed: u64) -> Vec<usize> {
    let mut rng = Rng::new(seed);
    (0..len).map(|_| rng.int_inclusive(1, vocab - 1)).collect()
}

/// Gray text-line-like image with horizontal structure.
pub fn text_line(height: usize, width: usize) -> ImageBuffer {
    let data = (0..height * width)
        .map(|i| {
            let (y, x) = (i / width, i % width);
            if (x / 7 + y / 5) % 3 == 0 {
                40
            } else {
                210
            }
        })
        .collect();
    ImageBuffer::new(height, width, 1, data).expect("consistent size")
}
