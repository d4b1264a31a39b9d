//! Trains a tiny arousal model, saves it, loads it back and shows that a
//! flipped payload byte is caught.
//!
//!     cargo run --example checkpoint

use movie_affect::datapack::{synthesize, ModalitySpec};
use movie_affect::training::{train_pipeline, Checkpoint, Task, TrainConfig};

fn main() -> movie_affect::Result<()> {
    let specs = vec![ModalitySpec::new("audio", 4), ModalitySpec::new("scene", 3)];
    let packs = synthesize(2, 60, &specs, 3, false)?;
    let cfg = TrainConfig {
        task: Task::Arousal,
        hidden: 4,
        embed: 6,
        context_hidden: 3,
        max_epochs: 5,
        validation_fraction: 0.5,
        ..TrainConfig::default()
    };
    let (ck, _) = train_pipeline(&packs, &cfg)?;

    let path = std::env::temp_dir().join("movie-affect-example.ckpt");
    ck.save(&path)?;
    let back = Checkpoint::load(&path)?;
    let bytes = std::fs::read(&path)?;
    println!("{} bytes at {}", bytes.len(), path.display());
    println!("task {}, modalities {:?}, round trip equal: {}", back.task, back.intra.active, back == ck);

    let mut bad = bytes.clone();
    let last = bad.len() - 1;
    bad[last] ^= 1;
    match Checkpoint::from_bytes(&bad) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("flipped byte rejected: {e}"),
    }
    Ok(())
}
