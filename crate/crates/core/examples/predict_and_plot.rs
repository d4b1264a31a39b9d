//! Trains a small valence model, writes the per-second prediction table
//! and a plot table for one movie, and prints the evaluation report.
//!
//!     cargo run --example predict_and_plot -- [out_dir]

use movie_affect::datapack::{synthesize, ModalitySpec};
use movie_affect::eval::{emit_plot_data, evaluate, prediction_rows, write_predictions};
use movie_affect::training::{train_pipeline, TrainConfig};

fn main() -> movie_affect::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("movie-affect-predict"), Into::into);
    std::fs::create_dir_all(&out)?;
    let specs = vec![ModalitySpec::new("audio", 6), ModalitySpec::new("scene", 6)];
    let packs = synthesize(4, 150, &specs, 21, false)?;
    let cfg = TrainConfig {
        hidden: 8,
        embed: 16,
        context_hidden: 8,
        max_epochs: 20,
        validation_fraction: 0.25,
        ..TrainConfig::default()
    };
    let (ck, summary) = train_pipeline(&packs, &cfg)?;
    println!("held out: {:?}", summary.val_movies);

    let (report, preds) = evaluate(&ck, &packs)?;
    write_predictions(&prediction_rows(&preds), out.join("predictions.csv"))?;
    let first = &preds[0];
    emit_plot_data(&first.track.values, &first.ground_truth, out.join("plot.csv"))?;
    for m in &report.movies {
        println!("{}: mse {:.4}, pcc {:.3}", m.movie_id, m.mse, m.pcc);
    }
    println!("pooled mse {:.4}, pcc {:.3}; tables in {}", report.pooled_mse, report.pooled_pcc, out.display());
    Ok(())
}
