//! Progressive multi-modal training, valence context training, and
//! checkpoints.

mod checkpoint;
mod config;
mod context;
mod fit;
mod loss;
mod pipeline;
mod stages;

pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use config::{RankMetric, Task, TrainConfig};
pub use context::{train_valence_context, ContextOutcome};
pub use fit::FitReport;
pub use loss::{clip_loss, clip_loss_on_tape, window_loss, window_loss_on_tape, ClipBatch, WindowBatch};
pub use pipeline::{
    movie_clips, prepare, select_modalities, split_movies, train_pipeline, MovieSplit, PipelineReport, Prepared,
    StepSummary,
};
pub use stages::{
    finetune, progressive_model, rank_modalities, train_progressive_step, train_stage1, train_stage2_progressive,
    FinetuneReport, ModalityScore, Stage1Result, Stage2Outcome, StepReport,
};
