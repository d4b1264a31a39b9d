//! Valence context training on frozen clip embeddings.

use std::collections::BTreeMap;

use super::fit::{fit, FitOptions, FitReport};
use super::loss::{window_loss, window_loss_on_tape, WindowBatch};
use super::TrainConfig;
use crate::datapack::{make_windows, ClipSample, WindowMode};
use crate::error::{Error, Result};
use crate::eval::mse;
use crate::model::{name_stream, ContextModel, IntraClipModel};
use crate::numcore::{Rng, Tensor2};

#[derive(Debug, Clone)]
pub struct ContextOutcome {
    pub model: ContextModel,
    pub fit: FitReport,
    /// Window loss of the returned model over every training window.
    pub train_window_loss: f64,
    /// Clip-level MSE on the validation movies, when there are any.
    pub val_mse: Option<f64>,
}

/// A training window: movie index and clip range start, plus its length.
#[derive(Debug, Clone, Copy)]
struct Slot {
    movie: usize,
    start: usize,
    len: usize,
}

fn embed_movies(intra: &IntraClipModel, movies: &[Vec<ClipSample>], batch: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    movies.iter().map(|m| intra.embed_clips(m, batch)).collect()
}

/// Trains the context model with every intra-clip parameter frozen.
///
/// Clip embeddings are computed once up front, since the intra-clip model
/// cannot change. Windows are stride-1 within each movie; movies shorter
/// than the window contribute one shorter window. Batches never mix window
/// lengths.
pub fn train_valence_context(
    train: &[Vec<ClipSample>],
    val: &[Vec<ClipSample>],
    intra: &IntraClipModel,
    cfg: &TrainConfig,
) -> Result<ContextOutcome> {
    let train_emb = embed_movies(intra, train, cfg.batch_size)?;
    let val_emb = embed_movies(intra, val, cfg.batch_size)?;
    let labels: Vec<Vec<f64>> = train.iter().map(|m| m.iter().map(|c| c.valence).collect()).collect();

    let mut slots = Vec::new();
    for (movie, emb) in train_emb.iter().enumerate() {
        for w in make_windows(emb.len(), cfg.window, WindowMode::Train)? {
            slots.push(Slot {
                movie,
                start: w.start,
                len: w.len,
            });
        }
    }
    if slots.is_empty() {
        return Err(Error::Data("no training windows for the context model".into()));
    }
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in slots.iter().enumerate() {
        by_len.entry(s.len).or_default().push(i);
    }

    let mut model = ContextModel::new(intra.embed, cfg.context_hidden, cfg.seed)?;
    let opts = FitOptions {
        optimizer: cfg.optimizer,
        max_epochs: cfg.context_epochs(),
        patience: cfg.patience,
        seed: cfg.seed,
        stream: name_stream("context"),
    };
    let has_val = val_emb.iter().any(|m| !m.is_empty());
    let val_labels: Vec<f64> = val.iter().flatten().map(|c| c.valence).collect();

    let mut store = std::mem::take(&mut model.store);
    let shadow = model.clone();
    let batch_size = cfg.batch_size.max(1);
    let result = fit(
        &mut store,
        &|_| true,
        &opts,
        |rng: &mut Rng| {
            let mut plan = Vec::new();
            for group in by_len.values() {
                let mut idx = group.clone();
                rng.shuffle(&mut idx);
                plan.extend(idx.chunks(batch_size).map(<[usize]>::to_vec));
            }
            rng.shuffle(&mut plan);
            plan
        },
        |g, idx| {
            let len = slots[idx[0]].len;
            let width = shadow.embed_width();
            let mut steps = Vec::with_capacity(len);
            for pos in 0..len {
                let mut x = Tensor2::zeros(width, idx.len());
                for (j, &k) in idx.iter().enumerate() {
                    let s = slots[k];
                    for (r, &v) in train_emb[s.movie][s.start + pos].iter().enumerate() {
                        x.set(r, j, v);
                    }
                }
                steps.push(g.constant(x));
            }
            let preds = shadow.forward(g, &steps)?;
            let y: Vec<Vec<f64>> = idx
                .iter()
                .map(|&k| {
                    let s = slots[k];
                    labels[s.movie][s.start..s.start + s.len].to_vec()
                })
                .collect();
            window_loss_on_tape(g, &preds, &y)
        },
        |s| {
            if !has_val {
                return Ok(None);
            }
            let mut probe = shadow.clone();
            probe.store = s.clone();
            let preds = predict_all(&probe, &val_emb, cfg.window)?;
            Ok(Some(mse(&preds, &val_labels)?))
        },
    );
    model.store = store;
    let report = result?;

    // Mean over lengths weighted by window count; with one length this is
    // exactly the window loss of one batch holding every window.
    let mut total = 0.0;
    for group in by_len.values() {
        let mut preds = Vec::with_capacity(group.len());
        let mut ys = Vec::with_capacity(group.len());
        for &k in group {
            let s = slots[k];
            preds.push(model.predict_embeddings(&train_emb[s.movie][s.start..s.start + s.len])?);
            ys.push(labels[s.movie][s.start..s.start + s.len].to_vec());
        }
        total += window_loss(&WindowBatch { labels: ys }, &preds)? * group.len() as f64;
    }
    let train_window_loss = total / slots.len() as f64;
    let val_mse = if has_val {
        Some(mse(&predict_all(&model, &val_emb, cfg.window)?, &val_labels)?)
    } else {
        None
    };
    log::info!(
        "context: train window loss {train_window_loss:.5}, val mse {val_mse:?} ({} epochs)",
        report.epochs
    );
    Ok(ContextOutcome {
        model,
        fit: report,
        train_window_loss,
        val_mse,
    })
}

fn predict_all(model: &ContextModel, movies: &[Vec<Vec<f64>>], len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for emb in movies {
        if !emb.is_empty() {
            out.extend(model.predict_movie(emb, len)?);
        }
    }
    Ok(out)
}
