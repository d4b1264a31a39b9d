//! Mini-batch Adam loop with early stopping on a validation score.

use crate::error::{Error, Result};
use crate::numcore::{AdamConfig, AdamState, Graph, ParamStore, Rng, Trainable, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub epochs: usize,
    pub best_epoch: usize,
    /// Best validation score, or best mean training loss when no
    /// validation data exists.
    pub best_score: f64,
    pub train_loss: Vec<f64>,
}

pub(crate) struct FitOptions {
    pub optimizer: AdamConfig,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub stream: u64,
}

/// Trains the parameters selected by `trainable` in place; the store ends
/// holding the best-scoring epoch's values.
///
/// `batches` yields index batches for one epoch; `loss` builds the batch
/// loss on a graph; `validate` scores the current store (`None` = no
/// validation data, fall back to training loss).
pub(crate) fn fit<B, L, V>(
    store: &mut ParamStore,
    trainable: &dyn Fn(&str) -> bool,
    opts: &FitOptions,
    mut batches: B,
    loss: L,
    validate: V,
) -> Result<FitReport>
where
    B: FnMut(&mut Rng) -> Vec<Vec<usize>>,
    L: Fn(&mut Graph, &[usize]) -> Result<Var>,
    V: Fn(&ParamStore) -> Result<Option<f64>>,
{
    if !store.names().any(trainable) {
        return Err(Error::State("nothing to train".into()));
    }
    let mut adam = AdamState::new(opts.optimizer)?;
    let mut rng = Rng::derive(opts.seed, opts.stream);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut train_loss = Vec::new();
    let mut epochs = 0;
    store.zero_grad();

    for epoch in 0..opts.max_epochs {
        epochs = epoch + 1;
        let plan = batches(&mut rng);
        if plan.is_empty() {
            return Err(Error::Data("no training batches".into()));
        }
        let mut total = 0.0;
        for batch in &plan {
            let grads = {
                let mut g = Graph::new(store, Trainable::Only(Box::new(trainable)));
                let l = loss(&mut g, batch)?;
                total += g.value(l).get(0, 0);
                g.gradients(l)?
            };
            for (name, grad) in &grads {
                store.accumulate(name, grad)?;
            }
            adam.step_filtered(store, trainable)?;
        }
        let mean_loss = total / plan.len() as f64;
        train_loss.push(mean_loss);
        let score = validate(store)?.unwrap_or(mean_loss);
        if !score.is_finite() {
            return Err(Error::Numeric(format!("validation score {score} at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: train {mean_loss:.6} score {score:.6}");
        let improved = best.as_ref().is_none_or(|(b, _, _)| score < *b);
        if improved {
            best = Some((score, epoch, store.clone()));
        } else if epoch - best.as_ref().map_or(0, |b| b.1) >= opts.patience {
            break;
        }
    }

    let (best_score, best_epoch, snapshot) = best.expect("at least one epoch ran");
    *store = snapshot;
    store.zero_grad();
    Ok(FitReport {
        epochs,
        best_epoch,
        best_score,
        train_loss,
    })
}

/// Shuffled contiguous batches over `0..n`.
pub(crate) fn shuffled_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tensor2;

    #[test]
    fn fits_a_linear_target_and_keeps_frozen_values() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor2::filled(1, 1, 0.0)).unwrap();
        store.insert("frozen", Tensor2::filled(1, 1, 2.0)).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 10.0 - 1.0).collect();
        let opts = FitOptions {
            optimizer: AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
            max_epochs: 200,
            patience: 200,
            seed: 1,
            stream: 0,
        };
        let report = fit(
            &mut store,
            &|n| n == "w",
            &opts,
            |rng| shuffled_batches(xs.len(), 5, rng),
            |g, idx| {
                let w = g.param("w")?;
                let k = g.param("frozen")?;
                let x = g.constant(Tensor2::from_vec(1, idx.len(), idx.iter().map(|&i| xs[i]).collect())?);
                let y = g.constant(Tensor2::from_vec(1, idx.len(), idx.iter().map(|&i| 0.5 * xs[i]).collect())?);
                let wk = g.mul(w, k)?;
                let wx = g.matmul(wk, x)?;
                g.mse(wx, y)
            },
            |_| Ok(None),
        )
        .unwrap();
        assert!(report.best_score < 1e-6, "{report:?}");
        assert!((store.value("w").unwrap().get(0, 0) - 0.25).abs() < 1e-3);
        assert_eq!(store.value("frozen").unwrap().get(0, 0), 2.0);
    }
}
