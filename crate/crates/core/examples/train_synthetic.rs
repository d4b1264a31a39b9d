//! Trains the full pipeline on in-memory synthetic movies and scores the
//! result on the training movies.
//!
//!     cargo run --example train_synthetic -- [valence|arousal] [movies] [seconds] [epochs]

use std::time::Instant;

use movie_affect::datapack::{synthesize, ModalitySpec};
use movie_affect::eval::evaluate;
use movie_affect::training::{train_pipeline, Task, TrainConfig};

fn main() -> movie_affect::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let task: Task = args.first().map_or("valence", String::as_str).parse()?;
    let movies = args.get(1).map_or(Ok(4), |s| s.parse()).expect("movie count");
    let seconds = args.get(2).map_or(Ok(120), |s| s.parse()).expect("seconds");
    let epochs = args.get(3).map_or(Ok(30), |s| s.parse()).expect("epochs");

    let specs: Vec<ModalitySpec> = ["audio", "scene", "expression"]
        .iter()
        .map(|&n| ModalitySpec::new(n, 16))
        .collect();
    let packs = synthesize(movies, seconds, &specs, 7, false)?;

    let cfg = TrainConfig {
        task,
        hidden: 16,
        embed: 32,
        context_hidden: 16,
        max_epochs: epochs,
        validation_fraction: 0.0,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (ck, report) = train_pipeline(&packs, &cfg)?;
    println!("ranking: {}", report.ranking.join(" > "));
    let (eval, _) = evaluate(&ck, &packs)?;
    println!(
        "{task}: training-set per-second mse {:.4}, pcc {:.3} ({:.1} s)",
        eval.pooled_mse,
        eval.pooled_pcc,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
