use crate::datapack::{make_windows, ClipSample, WindowMode};
use crate::error::{Error, Result};
use crate::layers::{Activation, BiLstmStack, DenseLayer};
use crate::numcore::{Graph, ParamStore, Rng, Tensor2, Trainable, Var};

use super::{name_stream, IntraClipModel};

pub const CONTEXT_PREFIX: &str = "ctx";

/// Inter-clip BiLSTM over clip embeddings with one shared tanh head
/// applied at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextModel {
    pub store: ParamStore,
    pub stack: BiLstmStack,
    pub head: DenseLayer,
}

impl ContextModel {
    pub fn new(embed: usize, hidden: usize, seed: u64) -> Result<Self> {
        if embed == 0 || hidden == 0 {
            return Err(Error::Config("context widths must be positive".into()));
        }
        let stack = BiLstmStack::new(CONTEXT_PREFIX, embed, hidden);
        let head = DenseLayer::new(format!("{CONTEXT_PREFIX}.head"), 2 * hidden, 1, Activation::Tanh);
        let mut store = ParamStore::new();
        let mut rng = Rng::derive(seed, name_stream(CONTEXT_PREFIX));
        stack.init(&mut store, &mut rng)?;
        head.init(&mut store, &mut rng)?;
        Ok(Self { store, stack, head })
    }

    pub fn embed_width(&self) -> usize {
        self.stack.input
    }

    /// One `1 × m` prediction per step for `E × m` step inputs.
    pub fn forward(&self, g: &mut Graph, steps: &[Var]) -> Result<Vec<Var>> {
        let hidden = self.stack.sequence(g, steps)?;
        hidden.into_iter().map(|h| self.head.forward(g, h)).collect()
    }

    /// Predictions for one window given its clip embeddings, in order.
    pub fn predict_embeddings(&self, embeddings: &[Vec<f64>]) -> Result<Vec<f64>> {
        if embeddings.is_empty() {
            return Err(Error::Input("empty context window".into()));
        }
        let mut g = Graph::new(&self.store, Trainable::None);
        let steps = embeddings
            .iter()
            .map(|e| {
                if e.len() != self.embed_width() {
                    return Err(Error::dim(
                        "context input",
                        (self.embed_width(), 1),
                        (e.len(), 1),
                    ));
                }
                Ok(g.constant(Tensor2::column(e)))
            })
            .collect::<Result<Vec<_>>>()?;
        let preds = self.forward(&mut g, &steps)?;
        Ok(preds.iter().map(|&p| g.value(p).get(0, 0)).collect())
    }

    /// One valence per clip of a movie from its clip embeddings, using
    /// stride-`len` windows with an overlapping tail.
    pub fn predict_movie(&self, embeddings: &[Vec<f64>], len: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(embeddings.len());
        for w in make_windows(embeddings.len(), len, WindowMode::Infer)? {
            let preds = self.predict_embeddings(&embeddings[w.clips()])?;
            out.extend_from_slice(&preds[w.skip..]);
        }
        Ok(out)
    }

    /// Valence per clip of a window: intra-clip embedding, then context.
    pub fn predict_window(&self, intra: &IntraClipModel, window: &[ClipSample]) -> Result<Vec<f64>> {
        let embeddings = intra.embed_clips(window, window.len().max(1))?;
        self.predict_embeddings(&embeddings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_prediction_per_step() {
        let ctx = ContextModel::new(3, 2, 5).unwrap();
        for len in [1, 4] {
            let emb: Vec<Vec<f64>> = (0..len).map(|i| vec![0.1 * i as f64, -0.2, 0.3]).collect();
            let out = ctx.predict_embeddings(&emb).unwrap();
            assert_eq!(out.len(), len);
            assert!(out.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn zero_parameters_predict_zero() {
        let mut ctx = ContextModel::new(3, 2, 5).unwrap();
        for (_, p) in ctx.store.iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        let out = ctx.predict_embeddings(&vec![vec![0.5, -0.5, 0.9]; 3]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn width_mismatch_is_dimension_error() {
        let ctx = ContextModel::new(3, 2, 5).unwrap();
        assert!(matches!(
            ctx.predict_embeddings(&[vec![0.0; 4]]),
            Err(Error::Dimension { .. })
        ));
        assert!(ctx.predict_embeddings(&[]).is_err());
    }
}
