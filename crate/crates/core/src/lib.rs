//! Clip-level movie affect regression from pre-extracted per-second
//! multi-modal features.
//!
//! Movies are cut into 10 s clips. Each modality is encoded by a
//! two-layer bidirectional LSTM, the encodings are summed, and dense
//! layers read out a clip prediction. Encoders are trained one modality
//! at a time in order of their single-modality performance, each new
//! encoder fitting what the frozen earlier ones miss. Valence adds an
//! inter-clip BiLSTM over windows of clip embeddings; arousal smooths the
//! raw clip predictions with an exponential moving average.

pub mod cli;
pub mod datapack;
mod error;
pub mod eval;
pub mod layers;
pub mod model;
pub mod numcore;
pub mod training;

pub use error::{Error, Result};
