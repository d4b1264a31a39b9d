//! End-to-end training: split, stage 1, ranking, stage 2, fine-tune, and
//! the valence context model.

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::context::train_valence_context;
use super::stages::{rank_modalities, train_stage1, train_stage2_progressive, ModalityScore};
use super::{Task, TrainConfig};
use crate::datapack::{segment_clips, ClipSample, ModalitySpec, MoviePack};
use crate::error::{Error, Result};
use crate::model::name_stream;
use crate::numcore::Rng;

/// Movie indices for training and validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovieSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Holds out `round(n·fraction)` whole movies, at least one when the
/// fraction is positive and at least one movie always stays in training.
pub fn split_movies(n: usize, fraction: f64, seed: u64) -> MovieSplit {
    let mut n_val = (n as f64 * fraction).round() as usize;
    if fraction > 0.0 && n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    } else {
        n_val = 0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::derive(seed, name_stream("split")).shuffle(&mut idx);
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    MovieSplit { train, val }
}

/// Clips per movie plus the modality specs in use.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub specs: Vec<ModalitySpec>,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub train: Vec<Vec<ClipSample>>,
    pub val: Vec<Vec<ClipSample>>,
}

impl Prepared {
    pub fn train_clips(&self) -> Vec<ClipSample> {
        self.train.iter().flatten().cloned().collect()
    }

    pub fn val_clips(&self) -> Vec<ClipSample> {
        self.val.iter().flatten().cloned().collect()
    }
}

/// The modalities selected by `cfg`, checked to exist with one width in
/// every pack.
pub fn select_modalities(packs: &[MoviePack], cfg: &TrainConfig) -> Result<Vec<ModalitySpec>> {
    let first = packs.first().ok_or_else(|| Error::Data("no movies".into()))?;
    let available = first.modality_specs();
    let specs = match &cfg.modalities {
        None => available,
        Some(names) => names
            .iter()
            .map(|n| {
                available
                    .iter()
                    .find(|s| &s.name == n)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("modality {n} not in movie {}", first.movie_id)))
            })
            .collect::<Result<_>>()?,
    };
    if specs.is_empty() {
        return Err(Error::Config("no modalities selected".into()));
    }
    for pack in packs {
        for spec in &specs {
            match pack.features.get(&spec.name) {
                Some(f) if f.cols() == spec.dim => {}
                Some(f) => {
                    return Err(Error::Data(format!(
                        "movie {}: modality {} has width {}, expected {}",
                        pack.movie_id,
                        spec.name,
                        f.cols(),
                        spec.dim
                    )))
                }
                None => {
                    return Err(Error::Data(format!(
                        "movie {} lacks modality {}",
                        pack.movie_id, spec.name
                    )))
                }
            }
        }
    }
    Ok(specs)
}

/// Segments every movie, keeping only the selected modalities.
pub fn movie_clips(pack: &MoviePack, specs: &[ModalitySpec], clip_seconds: usize) -> Result<Vec<ClipSample>> {
    let seg = segment_clips(pack, clip_seconds)?;
    if seg.too_short {
        log::warn!("movie {} is shorter than one clip; skipped", pack.movie_id);
    }
    Ok(seg
        .clips
        .into_iter()
        .map(|mut c| {
            c.features.retain(|k, _| specs.iter().any(|s| &s.name == k));
            c
        })
        .collect())
}

pub fn prepare(packs: &[MoviePack], cfg: &TrainConfig) -> Result<Prepared> {
    cfg.validate()?;
    let specs = select_modalities(packs, cfg)?;
    let split = split_movies(packs.len(), cfg.validation_fraction, cfg.seed);
    let build = |idx: &[usize]| -> Result<(Vec<String>, Vec<Vec<ClipSample>>)> {
        let mut ids = Vec::new();
        let mut clips = Vec::new();
        for &i in idx {
            ids.push(packs[i].movie_id.clone());
            clips.push(movie_clips(&packs[i], &specs, cfg.clip_seconds)?);
        }
        Ok((ids, clips))
    };
    let (train_ids, train) = build(&split.train)?;
    let (val_ids, val) = build(&split.val)?;
    if train.iter().all(Vec::is_empty) {
        return Err(Error::Data("training movies yield no clips".into()));
    }
    Ok(Prepared {
        specs,
        train_ids,
        val_ids,
        train,
        val,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub modality: String,
    pub val_mse: f64,
    pub val_pcc: f64,
    pub epochs: usize,
}

/// What happened during training; validation metrics are clip-level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub task: Task,
    pub train_movies: Vec<String>,
    pub val_movies: Vec<String>,
    pub stage1: Vec<ModalityScore>,
    pub ranking: Vec<String>,
    pub steps: Vec<StepSummary>,
    pub finetune_mse: f64,
    pub finetune_pcc: f64,
    pub context_train_window_loss: Option<f64>,
    pub context_val_mse: Option<f64>,
}

pub fn train_pipeline(packs: &[MoviePack], cfg: &TrainConfig) -> Result<(Checkpoint, PipelineReport)> {
    let data = prepare(packs, cfg)?;
    log::info!(
        "training {} on {} movies, validating on {}",
        cfg.task,
        data.train_ids.len(),
        data.val_ids.len()
    );
    let train = data.train_clips();
    let val = data.val_clips();

    let stage1 = data
        .specs
        .iter()
        .map(|s| train_stage1(&train, &val, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<ModalityScore> = stage1.iter().map(|r| r.score()).collect();
    let ranking = rank_modalities(&scores, cfg.ranking_metric);
    log::info!("modality ranking: {}", ranking.join(" > "));

    let outcome = train_stage2_progressive(&train, &val, &ranking, &data.specs, &stage1, cfg)?;
    let intra = outcome.model;
    let (context, ctx_loss, ctx_val) = match cfg.task {
        Task::Valence => {
            let ctx = train_valence_context(&data.train, &data.val, &intra, cfg)?;
            (Some(ctx.model), Some(ctx.train_window_loss), ctx.val_mse)
        }
        Task::Arousal => (None, None, None),
    };
    let modalities = ranking
        .iter()
        .map(|n| data.specs.iter().find(|s| &s.name == n).cloned().expect("ranked from specs"))
        .collect();
    let report = PipelineReport {
        task: cfg.task,
        train_movies: data.train_ids,
        val_movies: data.val_ids,
        stage1: scores,
        ranking: ranking.clone(),
        steps: outcome
            .steps
            .iter()
            .map(|s| StepSummary {
                modality: s.modality.clone(),
                val_mse: s.val_mse,
                val_pcc: s.val_pcc,
                epochs: s.fit.epochs,
            })
            .collect(),
        finetune_mse: outcome.finetune.val_mse,
        finetune_pcc: outcome.finetune.val_pcc,
        context_train_window_loss: ctx_loss,
        context_val_mse: ctx_val,
    };
    let checkpoint = Checkpoint {
        task: cfg.task,
        config: cfg.clone(),
        modalities,
        ranking,
        intra,
        context,
    };
    Ok((checkpoint, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_by_movie_and_seeded() {
        let s = split_movies(12, 0.2, 3);
        assert_eq!(s.val.len(), 2);
        assert_eq!(s.train.len(), 10);
        assert_eq!(s, split_movies(12, 0.2, 3));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn split_edge_cases() {
        assert!(split_movies(5, 0.0, 1).val.is_empty());
        assert_eq!(split_movies(2, 0.01, 1).val.len(), 1);
        assert_eq!(split_movies(2, 0.9, 1).train.len(), 1);
        assert!(split_movies(1, 0.5, 1).val.is_empty());
    }
}
