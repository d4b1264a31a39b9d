//! Metrics, per-second prediction tracks, reports, CSV tables, and the
//! gradient-check suite.

mod csv;
pub mod gradsuite;
mod metrics;
mod predict;

pub use csv::{
    emit_plot_data, movie_track, prediction_rows, read_predictions, sig9, write_predictions, PredictionRow,
    PLOT_HEADER, PREDICTION_HEADER,
};
pub use metrics::{mse, pcc, Correlation, DEGENERATE_VARIANCE};
pub use predict::{
    evaluate, expand_per_second, predict_movie, report_from_predictions, EvalReport, MovieMetrics, MoviePrediction,
    PredictionTrack,
};
