//! Desk-scale scene-text recognition.
//!
//! The crate covers the whole recognition loop for a CTC-based CRNN:
//! corpus statistics ([`datastats`]), a limited character set ([`charset`]),
//! image I/O and resizing ([`imaging`]), a seeded augmentation chain
//! ([`augment`]), CTC loss and decoders ([`ctc`]), a small network with exact
//! gradients ([`network`]), the training loop and over-fit ladder
//! ([`trainer`]) and exact-match evaluation with test-time augmentation
//! ([`evalmetrics`]).

pub mod augment;
pub mod charset;
pub mod ctc;
pub mod dataset;
pub mod datastats;
pub mod evalmetrics;
pub mod imaging;
pub mod network;
pub mod rng;
pub mod synth;
pub mod trainer;

mod svg;

pub use augment::{AugmentConfig, Stage};
pub use charset::{strip_spaces, Charset, CharsetError};
pub use ctc::{CtcResult, LogProbMatrix};
pub use dataset::Sample;
pub use imaging::{ImageBuffer, ResizePolicy};
pub use network::{Mode, NetConfig, Network};
pub use rng::Rng;
pub use trainer::TrainConfig;
