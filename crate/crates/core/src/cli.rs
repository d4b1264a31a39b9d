//! Command-line surface shared by the `movie-affect` binary.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::datapack::{gen_synthetic, load_dataset, ModalitySpec};
use crate::error::{Error, Result};
use crate::eval::{
    emit_plot_data, evaluate, gradsuite, movie_track, prediction_rows, read_predictions, write_predictions,
};
use crate::training::{train_pipeline, Checkpoint, Task, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "movie-affect", version, about = "Clip-level movie valence/arousal regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic feature packs, one directory per movie.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        movies: usize,
        #[arg(long)]
        seconds: usize,
        #[arg(long)]
        seed: u64,
        /// Add a modality of pure noise.
        #[arg(long)]
        noise_modality: bool,
        /// Comma-separated `name:dim` list; defaults to the four standard
        /// modalities.
        #[arg(long, value_parser = parse_specs)]
        modalities: Option<::std::vec::Vec<ModalitySpec>>,
    },
    /// Run the full training pipeline and write a checkpoint.
    Train {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write per-second predictions for every movie as CSV.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Refuse a checkpoint trained for another task.
        #[arg(long)]
        task: Option<Task>,
    },
    /// Score a checkpoint and write a JSON report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Refuse a checkpoint trained for another task.
        #[arg(long)]
        task: Option<Task>,
    },
    /// Finite-difference check of every layer and model; fails on any
    /// error above tolerance.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn a prediction CSV into a `second,prediction,ground_truth` table.
    PlotData {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Movie to export when the table holds several.
        #[arg(long)]
        movie: Option<String>,
    },
}

fn parse_specs(s: &str) -> std::result::Result<Vec<ModalitySpec>, String> {
    s.split(',')
        .map(|item| {
            let (name, dim) = item
                .split_once(':')
                .ok_or_else(|| format!("expected name:dim, got {item:?}"))?;
            let dim: usize = dim.parse().map_err(|_| format!("bad width in {item:?}"))?;
            if name.is_empty() || dim == 0 {
                return Err(format!("bad modality {item:?}"));
            }
            Ok(ModalitySpec::new(name, dim))
        })
        .collect()
}

fn load_checked(ckpt: &PathBuf, task: Option<Task>) -> Result<Checkpoint> {
    let ck = Checkpoint::load(ckpt)?;
    if let Some(t) = task {
        ck.expect_task(t)?;
    }
    log::info!(
        "checkpoint {}: task {}, seed {}, modalities {}",
        ckpt.display(),
        ck.task,
        ck.config.seed,
        ck.ranking.join(",")
    );
    log::info!("config: {}", serde_json::to_string(&ck.config)?);
    Ok(ck)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynthetic {
            out,
            movies,
            seconds,
            seed,
            noise_modality,
            modalities,
        } => {
            let specs = modalities.unwrap_or_else(ModalitySpec::defaults);
            log::info!("generating {movies} movies of {seconds} s, seed {seed}, noise modality {noise_modality}");
            let packs = gen_synthetic(&out, movies, seconds, &specs, seed, noise_modality)?;
            println!("wrote {} packs to {}", packs.len(), out.display());
        }
        Command::Train {
            task,
            data,
            config,
            out,
            seed,
        } => {
            let mut cfg = TrainConfig::from_file(&config)?;
            cfg.task = task;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            log::info!("seed {}", cfg.seed);
            log::info!("config: {}", serde_json::to_string(&cfg)?);
            let packs = load_dataset(&data)?;
            let (ck, report) = train_pipeline(&packs, &cfg)?;
            ck.save(&out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Predict { ckpt, data, out, task } => {
            let ck = load_checked(&ckpt, task)?;
            let packs = load_dataset(&data)?;
            let (_, preds) = evaluate(&ck, &packs)?;
            write_predictions(&prediction_rows(&preds), &out)?;
            println!("wrote predictions for {} movies to {}", preds.len(), out.display());
        }
        Command::Eval {
            ckpt,
            data,
            report,
            task,
        } => {
            let ck = load_checked(&ckpt, task)?;
            let packs = load_dataset(&data)?;
            let (rep, _) = evaluate(&ck, &packs)?;
            fs::write(&report, serde_json::to_string_pretty(&rep)?)?;
            println!(
                "{}: mse {:.5} pcc {:.4} (mean over {} movies); pooled mse {:.5} pcc {:.4}",
                rep.task,
                rep.mean_mse,
                rep.mean_pcc,
                rep.movies.len(),
                rep.pooled_mse,
                rep.pooled_pcc
            );
        }
        Command::Gradcheck { seed } => {
            log::info!("seed {seed}");
            let cases = gradsuite::run_suite(seed, 5)?;
            let mut failed = 0;
            for c in &cases {
                let tag = if c.passed() { "ok  " } else { "FAIL" };
                println!("{tag} {:<24} seed {:<4} max rel err {:.3e}", c.name, c.seed, c.error);
                failed += usize::from(!c.passed());
            }
            if failed > 0 {
                return Err(Error::Contract(format!(
                    "{failed} of {} gradient checks exceed {:e}",
                    cases.len(),
                    gradsuite::GRAD_TOLERANCE
                )));
            }
        }
        Command::PlotData { pred, out, movie } => {
            let rows = read_predictions(&pred)?;
            let (track, gt) = movie_track(&rows, movie.as_deref())?;
            emit_plot_data(&track, &gt, &out)?;
            println!("wrote {} seconds to {}", track.len(), out.display());
        }
    }
    Ok(())
}
