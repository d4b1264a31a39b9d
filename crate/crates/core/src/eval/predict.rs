use serde::{Deserialize, Serialize};

use super::metrics::{mse, pcc};
use crate::datapack::MoviePack;
use crate::error::{Error, Result};
use crate::model::ema_from_first;
use crate::training::{movie_clips, Checkpoint, Task, TrainConfig};

/// Per-second predictions for one movie.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrack {
    pub movie_id: String,
    pub task: Task,
    pub values: Vec<f64>,
}

/// Repeats every clip value `clip_seconds` times.
pub fn expand_per_second(clip_values: &[f64], clip_seconds: usize) -> Result<Vec<f64>> {
    if clip_values.is_empty() {
        return Err(Error::Input("no clip predictions to expand".into()));
    }
    if clip_seconds == 0 {
        return Err(Error::Config("clip length must be positive".into()));
    }
    Ok(clip_values
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, clip_seconds))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoviePrediction {
    /// Model output per clip before smoothing (valence: context output).
    pub clip_raw: Vec<f64>,
    /// What gets expanded: the EMA for arousal, `clip_raw` for valence.
    pub clip_final: Vec<f64>,
    pub track: PredictionTrack,
    /// Labels of the seconds the track covers.
    pub ground_truth: Vec<f64>,
}

/// Predicts one movie; `None` when it is shorter than one clip.
pub fn predict_movie(ck: &Checkpoint, pack: &MoviePack) -> Result<Option<MoviePrediction>> {
    let cfg = &ck.config;
    let clips = movie_clips(pack, &ck.modalities, cfg.clip_seconds)?;
    if clips.is_empty() {
        return Ok(None);
    }
    let (clip_raw, clip_final) = match ck.task {
        Task::Valence => {
            let ctx = ck
                .context
                .as_ref()
                .ok_or_else(|| Error::State("valence checkpoint without a context model".into()))?;
            let emb = ck.intra.embed_clips(&clips, cfg.batch_size)?;
            let v = ctx.predict_movie(&emb, cfg.window)?;
            (v.clone(), v)
        }
        Task::Arousal => {
            let raw = ck.intra.predict_clips(&clips, cfg.batch_size)?;
            let smooth = ema_from_first(&raw, cfg.beta)
                .ok_or_else(|| Error::Config(format!("beta {} outside [0, 1)", cfg.beta)))?;
            (raw, smooth)
        }
    };
    let values = expand_per_second(&clip_final, cfg.clip_seconds)?;
    let gt_all = match ck.task {
        Task::Valence => pack.valence(),
        Task::Arousal => pack.arousal(),
    };
    Ok(Some(MoviePrediction {
        clip_raw,
        clip_final,
        ground_truth: gt_all[..values.len()].to_vec(),
        track: PredictionTrack {
            movie_id: pack.movie_id.clone(),
            task: ck.task,
            values,
        },
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieMetrics {
    pub movie_id: String,
    pub seconds: usize,
    pub mse: f64,
    pub pcc: f64,
    pub pcc_degenerate: bool,
}

/// Per-second metrics per movie, their mean across movies, and the same
/// metrics over all movies' seconds pooled together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub movies: Vec<MovieMetrics>,
    pub mean_mse: f64,
    pub mean_pcc: f64,
    pub pooled_mse: f64,
    pub pooled_pcc: f64,
    pub pooled_pcc_degenerate: bool,
    pub skipped_movies: Vec<String>,
    pub config: TrainConfig,
}

pub fn report_from_predictions(
    task: Task,
    config: &TrainConfig,
    preds: &[MoviePrediction],
    skipped: Vec<String>,
) -> Result<EvalReport> {
    if preds.is_empty() {
        return Err(Error::Data("no movie long enough to evaluate".into()));
    }
    let mut movies = Vec::with_capacity(preds.len());
    let (mut all_p, mut all_g) = (Vec::new(), Vec::new());
    for p in preds {
        let r = pcc(&p.track.values, &p.ground_truth)?;
        movies.push(MovieMetrics {
            movie_id: p.track.movie_id.clone(),
            seconds: p.track.values.len(),
            mse: mse(&p.track.values, &p.ground_truth)?,
            pcc: r.value,
            pcc_degenerate: r.degenerate,
        });
        all_p.extend_from_slice(&p.track.values);
        all_g.extend_from_slice(&p.ground_truth);
    }
    let n = movies.len() as f64;
    let pooled = pcc(&all_p, &all_g)?;
    Ok(EvalReport {
        task,
        mean_mse: movies.iter().map(|m| m.mse).sum::<f64>() / n,
        mean_pcc: movies.iter().map(|m| m.pcc).sum::<f64>() / n,
        movies,
        pooled_mse: mse(&all_p, &all_g)?,
        pooled_pcc: pooled.value,
        pooled_pcc_degenerate: pooled.degenerate,
        skipped_movies: skipped,
        config: config.clone(),
    })
}

/// Predicts every movie and scores the tracks.
pub fn evaluate(ck: &Checkpoint, packs: &[MoviePack]) -> Result<(EvalReport, Vec<MoviePrediction>)> {
    let mut preds = Vec::new();
    let mut skipped = Vec::new();
    for pack in packs {
        match predict_movie(ck, pack)? {
            Some(p) => preds.push(p),
            None => {
                log::warn!("movie {} has no full clip; not evaluated", pack.movie_id);
                skipped.push(pack.movie_id.clone());
            }
        }
    }
    let report = report_from_predictions(ck.task, &ck.config, &preds, skipped)?;
    Ok((report, preds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_repeats_each_clip() {
        let v = expand_per_second(&[0.1, 0.2], 10).unwrap();
        assert_eq!(v.len(), 20);
        assert!(v[..10].iter().all(|&x| x == 0.1));
        assert!(v[10..].iter().all(|&x| x == 0.2));
        assert_eq!(expand_per_second(&[0.7], 10).unwrap(), vec![0.7; 10]);
        assert!(expand_per_second(&[], 10).is_err());
    }

    #[test]
    fn clip_means_of_expansion_recover_clips() {
        let clips = [0.3, -0.91, 0.123456789, 1.0 / 3.0];
        let v = expand_per_second(&clips, 10).unwrap();
        for (k, c) in v.chunks(10).enumerate() {
            let mean = c.iter().sum::<f64>() / 10.0;
            assert!((mean - clips[k]).abs() < 1e-15);
            assert!(c.iter().all(|&x| x == clips[k]));
        }
    }
}
