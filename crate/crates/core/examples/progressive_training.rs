//! Stage-1 pretraining per modality, ranking, and the residual progressive
//! steps, with validation error after each step.
//!
//!     cargo run --example progressive_training -- [seed]

use movie_affect::datapack::{synthesize, ModalitySpec};
use movie_affect::training::{prepare, rank_modalities, train_stage1, train_stage2_progressive, TrainConfig};

fn main() -> movie_affect::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    let specs: Vec<ModalitySpec> = ["a", "b", "c"].iter().map(|&n| ModalitySpec::new(n, 1)).collect();
    let cfg = TrainConfig {
        seed,
        hidden: 8,
        embed: 16,
        context_hidden: 8,
        max_epochs: 60,
        batch_size: 16,
        validation_fraction: 2.0 / 12.0,
        ..TrainConfig::default()
    };
    let packs = synthesize(12, 200, &specs, 100 + seed, false)?;
    let prep = prepare(&packs, &cfg)?;
    let (train, val) = (prep.train_clips(), prep.val_clips());
    println!("train {:?}\nval   {:?}", prep.train_ids, prep.val_ids);

    let stage1 = specs
        .iter()
        .map(|s| train_stage1(&train, &val, s, &cfg))
        .collect::<movie_affect::Result<Vec<_>>>()?;
    for r in &stage1 {
        println!("stage 1 {}: val mse {:.5}, pcc {:.3}", r.modality, r.val_mse, r.val_pcc);
    }
    let ranked = rank_modalities(&stage1.iter().map(|r| r.score()).collect::<Vec<_>>(), cfg.ranking_metric);

    let out = train_stage2_progressive(&train, &val, &ranked, &specs, &stage1, &cfg)?;
    for (i, step) in out.steps.iter().enumerate() {
        println!(
            "step {} (+{}): val mse {:.5} after {} epochs",
            i + 1,
            step.modality,
            step.val_mse,
            step.fit.epochs
        );
    }
    println!("fine-tune: val mse {:.5}, pcc {:.3}", out.finetune.val_mse, out.finetune.val_pcc);
    Ok(())
}
