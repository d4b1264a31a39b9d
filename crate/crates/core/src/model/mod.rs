//! Per-modality encoders, sum fusion with dense readout, the inter-clip
//! valence context model, and arousal smoothing.

mod context;
mod ema;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use context::ContextModel;
pub use ema::{ema_from_first, ema_smooth, EmaSmoother};

use crate::datapack::{ClipSample, ModalitySpec};
use crate::error::{Error, Result};
use crate::layers::{Activation, BiLstmStack, DenseLayer};
use crate::numcore::{Graph, ParamStore, Rng, Tensor2, Trainable, Var};

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

pub(crate) fn name_stream(name: &str) -> u64 {
    fnv1a(name.as_bytes())
}

/// Per-step `D × m` inputs for one modality of a clip batch.
pub fn step_inputs(clips: &[&ClipSample], modality: &str) -> Result<Vec<Tensor2>> {
    let first = clips
        .first()
        .ok_or_else(|| Error::Input("empty clip batch".into()))?;
    fn get<'c>(c: &'c ClipSample, modality: &str) -> Result<&'c Tensor2> {
        c.features
            .get(modality)
            .ok_or_else(|| Error::Config(format!("clip has no modality {modality}")))
    }
    let (steps, dim) = get(first, modality)?.shape();
    let m = clips.len();
    let mut out = vec![Tensor2::zeros(dim, m); steps];
    for (j, clip) in clips.iter().enumerate() {
        let f = get(clip, modality)?;
        if f.shape() != (steps, dim) {
            return Err(Error::dim("step_inputs", (steps, dim), f.shape()));
        }
        for (t, x) in out.iter_mut().enumerate() {
            for (d, &v) in f.row(t).iter().enumerate() {
                x.set(d, j, v);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityEncoder {
    pub modality: String,
    pub stack: BiLstmStack,
}

impl ModalityEncoder {
    pub fn new(modality: &str, input: usize, hidden: usize) -> Self {
        Self {
            modality: modality.to_string(),
            stack: BiLstmStack::new(format!("enc.{modality}"), input, hidden),
        }
    }

    pub fn prefix(&self) -> String {
        format!("{}.", self.stack.name)
    }

    pub fn output_width(&self) -> usize {
        self.stack.output_width()
    }

    /// `F × m` clip encodings.
    pub fn forward(&self, g: &mut Graph, clips: &[&ClipSample]) -> Result<Var> {
        let xs: Vec<Var> = step_inputs(clips, &self.modality)?
            .into_iter()
            .map(|x| g.constant(x))
            .collect();
        self.stack.encode(g, &xs)
    }
}

/// Two tanh dense layers `F → E → 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerHead {
    pub first: DenseLayer,
    pub second: DenseLayer,
}

impl TwoLayerHead {
    pub fn new(prefix: &str, input: usize, embed: usize) -> Self {
        Self {
            first: DenseLayer::new(format!("{prefix}.fc1"), input, embed, Activation::Tanh),
            second: DenseLayer::new(format!("{prefix}.fc2"), embed, 1, Activation::Tanh),
        }
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut Rng) -> Result<()> {
        self.first.init(store, rng)?;
        self.second.init(store, rng)
    }

    pub fn forward(&self, g: &mut Graph, fused: Var) -> Result<Var> {
        let e = self.first.forward(g, fused)?;
        self.second.forward(g, e)
    }
}

/// Temporary readout used while training encoders; never serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxHead {
    pub head: TwoLayerHead,
}

impl AuxHead {
    pub fn new(tag: &str, input: usize, embed: usize) -> Self {
        Self {
            head: TwoLayerHead::new(&format!("aux.{tag}"), input, embed),
        }
    }

    pub fn prefix(&self) -> String {
        self.head
            .first
            .name
            .strip_suffix("fc1")
            .unwrap_or_default()
            .to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntraClipModel {
    pub store: ParamStore,
    pub hidden: usize,
    pub embed: usize,
    pub encoders: IndexMap<String, ModalityEncoder>,
    pub active: Vec<String>,
    pub fusion: Option<TwoLayerHead>,
}

pub const FUSION_PREFIX: &str = "fusion";

impl IntraClipModel {
    /// Fresh encoders for every modality; no fusion layers yet.
    pub fn new(specs: &[ModalitySpec], hidden: usize, embed: usize, seed: u64) -> Result<Self> {
        if hidden == 0 || embed == 0 {
            return Err(Error::Config("hidden and embedding widths must be positive".into()));
        }
        let mut store = ParamStore::new();
        let mut encoders = IndexMap::new();
        for spec in specs {
            if encoders.contains_key(&spec.name) {
                return Err(Error::Config(format!("modality {} listed twice", spec.name)));
            }
            let enc = ModalityEncoder::new(&spec.name, spec.dim, hidden);
            let mut rng = Rng::derive(seed, name_stream(&enc.stack.name));
            enc.stack.init(&mut store, &mut rng)?;
            encoders.insert(spec.name.clone(), enc);
        }
        Ok(Self {
            store,
            hidden,
            embed,
            encoders,
            active: specs.iter().map(|s| s.name.clone()).collect(),
            fusion: None,
        })
    }

    pub fn fused_width(&self) -> usize {
        2 * self.hidden
    }

    pub fn encoder(&self, modality: &str) -> Result<&ModalityEncoder> {
        self.encoders
            .get(modality)
            .ok_or_else(|| Error::Config(format!("unknown modality {modality}")))
    }

    /// Adds fresh fusion layers (replacing any existing ones).
    pub fn attach_fusion(&mut self, seed: u64) -> Result<()> {
        let head = TwoLayerHead::new(FUSION_PREFIX, self.fused_width(), self.embed);
        let mut rng = Rng::derive(seed, name_stream(FUSION_PREFIX));
        head.init(&mut self.store, &mut rng)?;
        self.fusion = Some(head);
        Ok(())
    }

    pub fn add_aux_head(&mut self, tag: &str, seed: u64) -> Result<AuxHead> {
        let aux = AuxHead::new(tag, self.fused_width(), self.embed);
        let mut rng = Rng::derive(seed, name_stream(&aux.prefix()));
        aux.head.init(&mut self.store, &mut rng)?;
        Ok(aux)
    }

    pub fn remove_aux_head(&mut self, aux: &AuxHead) {
        self.store.remove_prefix(&aux.prefix());
    }

    fn fusion(&self) -> Result<&TwoLayerHead> {
        self.fusion
            .as_ref()
            .ok_or_else(|| Error::State("model has no fusion layers yet".into()))
    }

    /// Sum over `subset` of encoder outputs (`F × m`). Terms are added in
    /// modality-name order so the result does not depend on subset order.
    pub fn fuse(&self, g: &mut Graph, clips: &[&ClipSample], subset: &[String]) -> Result<Var> {
        if subset.is_empty() {
            return Err(Error::Config("fusion subset is empty".into()));
        }
        let mut ordered: Vec<&String> = subset.iter().collect();
        ordered.sort();
        let parts = ordered
            .into_iter()
            .map(|m| self.encoder(m)?.forward(g, clips))
            .collect::<Result<Vec<_>>>()?;
        g.sum(&parts)
    }

    pub fn embedding(&self, g: &mut Graph, fused: Var) -> Result<Var> {
        self.fusion()?.first.forward(g, fused)
    }

    pub fn readout(&self, g: &mut Graph, fused: Var) -> Result<Var> {
        self.fusion()?.forward(g, fused)
    }

    fn eval_graph<T>(&self, f: impl FnOnce(&mut Graph) -> Result<T>) -> Result<T> {
        let mut g = Graph::new(&self.store, Trainable::None);
        f(&mut g)
    }

    /// Fused `F × m` encodings without recording gradients.
    pub fn fused_values(&self, clips: &[&ClipSample], subset: &[String]) -> Result<Tensor2> {
        self.eval_graph(|g| {
            let v = self.fuse(g, clips, subset)?;
            Ok(g.value(v).clone())
        })
    }

    /// Sum of the subset's clip encodings for one clip.
    pub fn encode_clip(&self, clip: &ClipSample, subset: &[String]) -> Result<Vec<f64>> {
        Ok(self.fused_values(&[clip], subset)?.into_vec())
    }

    pub fn clip_embedding(&self, fused: &[f64]) -> Result<Vec<f64>> {
        self.check_fused(fused)?;
        self.eval_graph(|g| {
            let x = g.constant(Tensor2::column(fused));
            let e = self.embedding(g, x)?;
            Ok(g.value(e).data().to_vec())
        })
    }

    pub fn predict_arousal_raw(&self, fused: &[f64]) -> Result<f64> {
        self.check_fused(fused)?;
        self.eval_graph(|g| {
            let x = g.constant(Tensor2::column(fused));
            let y = self.readout(g, x)?;
            Ok(g.value(y).get(0, 0))
        })
    }

    fn check_fused(&self, fused: &[f64]) -> Result<()> {
        if fused.len() != self.fused_width() {
            return Err(Error::dim("fused vector", (self.fused_width(), 1), (fused.len(), 1)));
        }
        Ok(())
    }

    /// Clip embeddings (`E` each) over the active set, in batches.
    pub fn embed_clips(&self, clips: &[ClipSample], batch: usize) -> Result<Vec<Vec<f64>>> {
        self.map_batches(clips, batch, |g, fused| self.embedding(g, fused))
    }

    /// Raw readout per clip over the active set.
    pub fn predict_clips(&self, clips: &[ClipSample], batch: usize) -> Result<Vec<f64>> {
        Ok(self
            .map_batches(clips, batch, |g, fused| self.readout(g, fused))?
            .into_iter()
            .map(|v| v[0])
            .collect())
    }

    fn map_batches(
        &self,
        clips: &[ClipSample],
        batch: usize,
        head: impl Fn(&mut Graph, Var) -> Result<Var>,
    ) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(clips.len());
        for chunk in clips.chunks(batch.max(1)) {
            let refs: Vec<&ClipSample> = chunk.iter().collect();
            let cols = self.eval_graph(|g| {
                let fused = self.fuse(g, &refs, &self.active)?;
                let y = head(g, fused)?;
                let t = g.value(y);
                Ok((0..t.cols()).map(|j| t.col_values(j)).collect::<Vec<_>>())
            })?;
            out.extend(cols);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(dims: &[(&str, usize)], seed: u64) -> ClipSample {
        let mut rng = Rng::new(seed);
        let features = dims
            .iter()
            .map(|&(n, d)| {
                let data = (0..10 * d).map(|_| rng.normal()).collect();
                (n.to_string(), Tensor2::from_vec(10, d, data).unwrap())
            })
            .collect();
        ClipSample {
            movie_id: "m".into(),
            clip_index: 0,
            features,
            valence: 0.0,
            arousal: 0.0,
        }
    }

    fn model() -> IntraClipModel {
        let specs = [ModalitySpec::new("a", 3), ModalitySpec::new("b", 2)];
        let mut m = IntraClipModel::new(&specs, 4, 5, 11).unwrap();
        m.attach_fusion(11).unwrap();
        m
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_modality_subset_is_that_encoder() {
        let m = model();
        let c = clip(&[("a", 3), ("b", 2)], 1);
        let fused = m.encode_clip(&c, &names(&["a"])).unwrap();
        let direct = m.encoders["a"].stack.eval_encode(&m.store, &c.features["a"]).unwrap();
        assert_eq!(fused, direct);
    }

    #[test]
    fn zero_encoder_is_neutral_and_sum_commutes() {
        let mut m = model();
        let c = clip(&[("a", 3), ("b", 2)], 2);
        let ab = m.encode_clip(&c, &names(&["a", "b"])).unwrap();
        let ba = m.encode_clip(&c, &names(&["b", "a"])).unwrap();
        assert_eq!(ab, ba);
        let prefix = m.encoders["b"].prefix();
        for (n, p) in m.store.iter_mut() {
            if n.starts_with(&prefix) {
                p.value.data_mut().fill(0.0);
            }
        }
        let a_only = m.encode_clip(&c, &names(&["a"])).unwrap();
        let with_zero = m.encode_clip(&c, &names(&["a", "b"])).unwrap();
        assert_eq!(a_only, with_zero);
    }

    #[test]
    fn unknown_modality_is_config_error() {
        let m = model();
        let c = clip(&[("a", 3), ("b", 2)], 3);
        assert!(matches!(m.encode_clip(&c, &names(&["z"])), Err(Error::Config(_))));
        assert!(matches!(m.encode_clip(&c, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn embedding_and_arousal_bounds() {
        let mut m = model();
        let zero = vec![0.0; 8];
        assert!(m.clip_embedding(&zero).unwrap().iter().all(|&v| v == 0.0));
        let big: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) * 2.0).collect();
        assert!(m.clip_embedding(&big).unwrap().iter().all(|v| v.abs() < 1.0));
        let y = m.predict_arousal_raw(&big).unwrap();
        assert!(y.abs() < 1.0);
        assert!(m.clip_embedding(&[0.0; 3]).is_err());
        for (_, p) in m.store.iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        assert_eq!(m.predict_arousal_raw(&big).unwrap(), 0.0);
    }

    #[test]
    fn prediction_requires_fusion_layers() {
        let specs = [ModalitySpec::new("a", 3)];
        let m = IntraClipModel::new(&specs, 4, 5, 1).unwrap();
        assert!(matches!(m.predict_arousal_raw(&[0.0; 8]), Err(Error::State(_))));
    }

    #[test]
    fn aux_heads_come_and_go() {
        let mut m = model();
        let before = m.store.len();
        let aux = m.add_aux_head("s1", 3).unwrap();
        assert_eq!(m.store.len(), before + 4);
        m.remove_aux_head(&aux);
        assert_eq!(m.store.len(), before);
    }
}
