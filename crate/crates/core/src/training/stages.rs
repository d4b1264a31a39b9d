//! Single-modality pretraining, modality ranking, and progressive
//! residual training of the intra-clip model.

use serde::{Deserialize, Serialize};

use super::fit::{fit, shuffled_batches, FitOptions, FitReport};
use super::loss::clip_loss_on_tape;
use super::{RankMetric, Task, TrainConfig};
use crate::datapack::{ClipSample, ModalitySpec};
use crate::error::{Error, Result};
use crate::eval::{mse, pcc};
use crate::model::{name_stream, AuxHead, IntraClipModel, TwoLayerHead, FUSION_PREFIX};
use crate::numcore::{Graph, ParamStore, Tensor2, Trainable};

pub(crate) fn target(clip: &ClipSample, task: Task) -> f64 {
    match task {
        Task::Valence => clip.valence,
        Task::Arousal => clip.arousal,
    }
}

pub(crate) fn targets(clips: &[ClipSample], task: Task) -> Vec<f64> {
    clips.iter().map(|c| target(c, task)).collect()
}

fn fit_options(cfg: &TrainConfig, stream: &str) -> FitOptions {
    FitOptions {
        optimizer: cfg.optimizer,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        seed: cfg.seed,
        stream: name_stream(stream),
    }
}

/// Clip-level MSE and PCC of `preds` against the task labels.
fn score(preds: &[f64], clips: &[ClipSample], task: Task) -> Result<(f64, f64)> {
    let gt = targets(clips, task);
    let m = mse(preds, &gt)?;
    let r = if gt.len() >= 2 { pcc(preds, &gt)?.value } else { 0.0 };
    Ok((m, r))
}

/// Predictions of `head` over the sum of `subset` encoders.
fn head_predictions(
    model: &IntraClipModel,
    store: &ParamStore,
    head: &TwoLayerHead,
    clips: &[ClipSample],
    subset: &[String],
    batch: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(clips.len());
    for chunk in clips.chunks(batch.max(1)) {
        let refs: Vec<&ClipSample> = chunk.iter().collect();
        let mut g = Graph::new(store, Trainable::None);
        let fused = model.fuse(&mut g, &refs, subset)?;
        let y = head.forward(&mut g, fused)?;
        out.extend_from_slice(g.value(y).data());
    }
    Ok(out)
}

/// Stage-1 outcome for one modality: its encoder, auxiliary head, and
/// held-out metrics.
#[derive(Debug, Clone)]
pub struct Stage1Result {
    pub modality: String,
    pub model: IntraClipModel,
    pub aux: AuxHead,
    pub val_mse: f64,
    pub val_pcc: f64,
    pub fit: FitReport,
}

impl Stage1Result {
    pub fn score(&self) -> ModalityScore {
        ModalityScore {
            modality: self.modality.clone(),
            mse: self.val_mse,
            pcc: self.val_pcc,
        }
    }
}

/// Trains one modality's encoder with a two-layer auxiliary head.
///
/// Metrics are computed on `val`; with no validation clips they fall back
/// to the training clips.
pub fn train_stage1(
    train: &[ClipSample],
    val: &[ClipSample],
    spec: &ModalitySpec,
    cfg: &TrainConfig,
) -> Result<Stage1Result> {
    if train.is_empty() {
        return Err(Error::Data("stage 1 has no training clips".into()));
    }
    let mut model = IntraClipModel::new(std::slice::from_ref(spec), cfg.hidden, cfg.embed, cfg.seed)?;
    let aux = model.add_aux_head(&format!("stage1.{}", spec.name), cfg.seed)?;
    let subset = vec![spec.name.clone()];
    let labels = targets(train, cfg.task);
    let eval_clips = if val.is_empty() { train } else { val };
    let has_val = !val.is_empty();

    let mut store = std::mem::take(&mut model.store);
    let report = fit(
        &mut store,
        &|_| true,
        &fit_options(cfg, &format!("stage1/{}", spec.name)),
        |rng| shuffled_batches(train.len(), cfg.batch_size, rng),
        |g, idx| {
            let clips: Vec<&ClipSample> = idx.iter().map(|&i| &train[i]).collect();
            let fused = model.fuse(g, &clips, &subset)?;
            let pred = aux.head.forward(g, fused)?;
            let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            clip_loss_on_tape(g, pred, &y)
        },
        |s| {
            if !has_val {
                return Ok(None);
            }
            let p = head_predictions(&model, s, &aux.head, val, &subset, cfg.batch_size)?;
            Ok(Some(score(&p, val, cfg.task)?.0))
        },
    )?;
    model.store = store;
    let preds = head_predictions(&model, &model.store, &aux.head, eval_clips, &subset, cfg.batch_size)?;
    let (val_mse, val_pcc) = score(&preds, eval_clips, cfg.task)?;
    log::info!(
        "stage 1 {}: mse {val_mse:.5} pcc {val_pcc:.4} ({} epochs)",
        spec.name,
        report.epochs
    );
    Ok(Stage1Result {
        modality: spec.name.clone(),
        model,
        aux,
        val_mse,
        val_pcc,
        fit: report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityScore {
    pub modality: String,
    pub mse: f64,
    pub pcc: f64,
}

/// Best first: ascending MSE or descending PCC, ties by modality name.
pub fn rank_modalities(scores: &[ModalityScore], metric: RankMetric) -> Vec<String> {
    let mut sorted: Vec<&ModalityScore> = scores.iter().collect();
    sorted.sort_by(|a, b| {
        let primary = match metric {
            RankMetric::Mse => a.mse.total_cmp(&b.mse),
            RankMetric::Pcc => b.pcc.total_cmp(&a.pcc),
        };
        primary.then_with(|| a.modality.cmp(&b.modality))
    });
    sorted.into_iter().map(|s| s.modality.clone()).collect()
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub modality: String,
    pub val_mse: f64,
    pub val_pcc: f64,
    pub fit: FitReport,
    /// Trained auxiliary head of this step.
    pub aux: AuxHead,
    pub aux_values: ParamStore,
}

/// Builds the stage-2 model: one encoder per ranked modality, initialised
/// from its stage-1 weights.
pub fn progressive_model(
    ranked: &[String],
    specs: &[ModalitySpec],
    stage1: &[Stage1Result],
    cfg: &TrainConfig,
) -> Result<IntraClipModel> {
    if ranked.is_empty() {
        return Err(Error::Config("no modalities to train".into()));
    }
    let ordered = ranked
        .iter()
        .map(|name| {
            specs
                .iter()
                .find(|s| &s.name == name)
                .cloned()
                .ok_or_else(|| Error::Config(format!("no spec for modality {name}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut model = IntraClipModel::new(&ordered, cfg.hidden, cfg.embed, cfg.seed)?;
    for name in ranked {
        let pre = stage1
            .iter()
            .find(|r| &r.modality == name)
            .ok_or_else(|| Error::State(format!("no stage-1 weights for modality {name}")))?;
        let prefix = model.encoder(name)?.prefix();
        let copied = model.store.copy_prefix_from(&pre.model.store, &prefix)?;
        if copied == 0 {
            return Err(Error::State(format!("stage-1 result for {name} holds no encoder weights")));
        }
    }
    model.active = ranked.to_vec();
    Ok(model)
}

/// Step `step` of progressive training: encoders `0..step` stay frozen,
/// encoder `step` and a fresh auxiliary head learn the residual on top of
/// the frozen sum.
pub fn train_progressive_step(
    model: &mut IntraClipModel,
    ranked: &[String],
    step: usize,
    train: &[ClipSample],
    val: &[ClipSample],
    cfg: &TrainConfig,
) -> Result<StepReport> {
    if train.is_empty() {
        return Err(Error::Data("stage 2 has no training clips".into()));
    }
    let modality = ranked
        .get(step)
        .ok_or_else(|| Error::Config(format!("step {step} beyond {} modalities", ranked.len())))?
        .clone();
    let frozen = &ranked[..step];
    let frozen_sum = if frozen.is_empty() {
        None
    } else {
        let refs: Vec<&ClipSample> = train.iter().collect();
        Some(model.fused_values(&refs, frozen)?)
    };
    let enc_prefix = model.encoder(&modality)?.prefix();
    let aux = model.add_aux_head(&format!("step{step}"), cfg.seed)?;
    let aux_prefix = aux.prefix();
    let labels = targets(train, cfg.task);
    let subset = ranked[..=step].to_vec();
    let has_val = !val.is_empty();

    let trainable = |n: &str| n.starts_with(&enc_prefix) || n.starts_with(&aux_prefix);
    let mut store = std::mem::take(&mut model.store);
    let shadow = model.clone();
    let result = fit(
        &mut store,
        &trainable,
        &fit_options(cfg, &format!("stage2/{step}/{modality}")),
        |rng| shuffled_batches(train.len(), cfg.batch_size, rng),
        |g, idx| {
            let clips: Vec<&ClipSample> = idx.iter().map(|&i| &train[i]).collect();
            let own = shadow.encoder(&modality)?.forward(g, &clips)?;
            let fused = match &frozen_sum {
                None => own,
                Some(sum) => {
                    let mut cols = Tensor2::zeros(sum.rows(), idx.len());
                    for (j, &i) in idx.iter().enumerate() {
                        for r in 0..sum.rows() {
                            cols.set(r, j, sum.get(r, i));
                        }
                    }
                    let c = g.constant(cols);
                    g.add(own, c)?
                }
            };
            let pred = aux.head.forward(g, fused)?;
            let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            clip_loss_on_tape(g, pred, &y)
        },
        |s| {
            if !has_val {
                return Ok(None);
            }
            let p = head_predictions(&shadow, s, &aux.head, val, &subset, cfg.batch_size)?;
            Ok(Some(score(&p, val, cfg.task)?.0))
        },
    );
    model.store = store;
    let report = result?;
    let eval_clips = if has_val { val } else { train };
    let preds = head_predictions(model, &model.store, &aux.head, eval_clips, &subset, cfg.batch_size)?;
    let (val_mse, val_pcc) = score(&preds, eval_clips, cfg.task)?;
    let mut aux_values = ParamStore::new();
    aux_values.copy_prefix_from(&model.store, &aux_prefix)?;
    model.remove_aux_head(&aux);
    log::info!("stage 2 step {step} ({modality}): mse {val_mse:.5} pcc {val_pcc:.4}");
    Ok(StepReport {
        modality,
        val_mse,
        val_pcc,
        fit: report,
        aux,
        aux_values,
    })
}

#[derive(Debug, Clone)]
pub struct FinetuneReport {
    pub val_mse: f64,
    pub val_pcc: f64,
    pub fit: FitReport,
}

/// Attaches the fusion layers, seeded from `init` when given, and trains
/// every active encoder together with them.
pub fn finetune(
    model: &mut IntraClipModel,
    init: Option<&StepReport>,
    train: &[ClipSample],
    val: &[ClipSample],
    cfg: &TrainConfig,
) -> Result<FinetuneReport> {
    model.attach_fusion(cfg.seed)?;
    if let Some(step) = init {
        let fusion = model.fusion.clone().expect("just attached");
        let pairs = [
            (&step.aux.head.first, &fusion.first),
            (&step.aux.head.second, &fusion.second),
        ];
        for (from, to) in pairs {
            model
                .store
                .set(&to.weight_name(), step.aux_values.value(&from.weight_name())?.clone())?;
            model
                .store
                .set(&to.bias_name(), step.aux_values.value(&from.bias_name())?.clone())?;
        }
    }
    let prefixes: Vec<String> = model
        .active
        .iter()
        .map(|m| Ok(model.encoder(m)?.prefix()))
        .collect::<Result<_>>()?;
    let fusion_prefix = format!("{FUSION_PREFIX}.");
    let trainable = |n: &str| n.starts_with(&fusion_prefix) || prefixes.iter().any(|p| n.starts_with(p));
    let labels = targets(train, cfg.task);
    let has_val = !val.is_empty();

    let mut store = std::mem::take(&mut model.store);
    let shadow = model.clone();
    let result = fit(
        &mut store,
        &trainable,
        &fit_options(cfg, "finetune"),
        |rng| shuffled_batches(train.len(), cfg.batch_size, rng),
        |g, idx| {
            let clips: Vec<&ClipSample> = idx.iter().map(|&i| &train[i]).collect();
            let fused = shadow.fuse(g, &clips, &shadow.active)?;
            let pred = shadow.readout(g, fused)?;
            let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            clip_loss_on_tape(g, pred, &y)
        },
        |s| {
            if !has_val {
                return Ok(None);
            }
            let mut probe = shadow.clone();
            probe.store = s.clone();
            let p = probe.predict_clips(val, cfg.batch_size)?;
            Ok(Some(score(&p, val, cfg.task)?.0))
        },
    );
    model.store = store;
    let report = result?;
    let eval_clips = if has_val { val } else { train };
    let preds = model.predict_clips(eval_clips, cfg.batch_size)?;
    let (val_mse, val_pcc) = score(&preds, eval_clips, cfg.task)?;
    log::info!("fine-tune: mse {val_mse:.5} pcc {val_pcc:.4} ({} epochs)", report.epochs);
    Ok(FinetuneReport {
        val_mse,
        val_pcc,
        fit: report,
    })
}

#[derive(Debug, Clone)]
pub struct Stage2Outcome {
    pub model: IntraClipModel,
    pub steps: Vec<StepReport>,
    pub finetune: FinetuneReport,
}

/// Progressive residual training over `ranked`, then full fine-tuning.
pub fn train_stage2_progressive(
    train: &[ClipSample],
    val: &[ClipSample],
    ranked: &[String],
    specs: &[ModalitySpec],
    stage1: &[Stage1Result],
    cfg: &TrainConfig,
) -> Result<Stage2Outcome> {
    let mut model = progressive_model(ranked, specs, stage1, cfg)?;
    let mut steps = Vec::with_capacity(ranked.len());
    for step in 0..ranked.len() {
        steps.push(train_progressive_step(&mut model, ranked, step, train, val, cfg)?);
    }
    let finetune = finetune(&mut model, steps.last(), train, val, cfg)?;
    Ok(Stage2Outcome {
        model,
        steps,
        finetune,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(m: &str, mse: f64, pcc: f64) -> ModalityScore {
        ModalityScore {
            modality: m.into(),
            mse,
            pcc,
        }
    }

    #[test]
    fn ranking_ties_break_by_name() {
        let scores = [s("zeta", 0.1, 0.3), s("alpha", 0.1, 0.3), s("mid", 0.05, 0.1)];
        assert_eq!(rank_modalities(&scores, RankMetric::Mse), ["mid", "alpha", "zeta"]);
        assert_eq!(rank_modalities(&scores, RankMetric::Pcc), ["alpha", "zeta", "mid"]);
    }

    #[test]
    fn missing_stage1_weights_is_a_state_error() {
        let specs = [ModalitySpec::new("a", 2)];
        let err = progressive_model(&["a".to_string()], &specs, &[], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }
}
