//! Finite-difference checks of every trainable component, on small seeded
//! random configurations.

use indexmap::IndexMap;
use serde::Serialize;

use crate::datapack::{ClipSample, ModalitySpec};
use crate::error::Result;
use crate::layers::{Activation, BiLstmStack, DenseLayer, LstmCell};
use crate::model::{ContextModel, IntraClipModel};
use crate::numcore::{grad_check, Graph, ParamStore, Rng, Tensor2, Var};
use crate::training::{clip_loss_on_tape, window_loss_on_tape};

pub const GRAD_EPS: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCase {
    pub name: &'static str,
    pub seed: u64,
    pub error: f64,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.error < GRAD_TOLERANCE
    }
}

fn random(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Tensor2 {
    let data = (0..rows * cols).map(|_| scale * rng.normal()).collect();
    Tensor2::from_vec(rows, cols, data).expect("sized")
}

fn labels(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_range(-0.9, 0.9)).collect()
}

/// Tanh dense layer, batch of 4, MSE loss.
pub fn dense_case(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let layer = DenseLayer::new("d", 3, 2, Activation::Tanh);
    let mut store = ParamStore::new();
    layer.init(&mut store, &mut rng)?;
    let x = random(&mut rng, 3, 4, 1.0);
    let y = random(&mut rng, 2, 4, 0.5);
    grad_check(
        |g: &mut Graph| {
            let xv = g.constant(x.clone());
            let yv = g.constant(y.clone());
            let out = layer.forward(g, xv)?;
            g.mse(out, yv)
        },
        &store,
        GRAD_EPS,
    )
}

/// One LSTM cell unrolled over 3 steps with a trainable initial state.
pub fn lstm_case(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let cell = LstmCell::new("c", 3, 4);
    let mut store = ParamStore::new();
    cell.init(&mut store, &mut rng)?;
    store.insert("h0", random(&mut rng, 4, 2, 0.5))?;
    store.insert("c0", random(&mut rng, 4, 2, 0.5))?;
    let xs: Vec<Tensor2> = (0..3).map(|_| random(&mut rng, 3, 2, 1.0)).collect();
    let y = random(&mut rng, 4, 2, 0.5);
    grad_check(
        |g: &mut Graph| {
            let mut h = g.param("h0")?;
            let mut c = g.param("c0")?;
            for x in &xs {
                let xv = g.constant(x.clone());
                (h, c) = cell.step(g, xv, h, c)?;
            }
            let yv = g.constant(y.clone());
            g.mse(h, yv)
        },
        &store,
        GRAD_EPS,
    )
}

/// Two-layer BiLSTM encoding of 5 steps followed by a tanh dense head.
pub fn bilstm_case(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let stack = BiLstmStack::new("s", 3, 3);
    let head = DenseLayer::new("h", 6, 1, Activation::Tanh);
    let mut store = ParamStore::new();
    stack.init(&mut store, &mut rng)?;
    head.init(&mut store, &mut rng)?;
    let xs: Vec<Tensor2> = (0..5).map(|_| random(&mut rng, 3, 2, 1.0)).collect();
    let y = labels(&mut rng, 2);
    grad_check(
        |g: &mut Graph| {
            let vars: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
            let enc = stack.encode(g, &vars)?;
            let out = head.forward(g, enc)?;
            clip_loss_on_tape(g, out, &y)
        },
        &store,
        GRAD_EPS,
    )
}

/// Perturbs every parameter. Fresh small LSTMs leave some recurrent
/// weights with gradients near 1e-9, where central differences at
/// eps = 1e-5 carry roundoff of the same order; moving off the init keeps
/// every entry measurable without changing what is checked.
fn jitter(store: &mut ParamStore, rng: &mut Rng) {
    for (_, p) in store.iter_mut() {
        for v in p.value.data_mut() {
            *v += 0.5 * rng.normal();
        }
    }
}

fn random_clip(rng: &mut Rng, specs: &[ModalitySpec], seconds: usize, index: usize, scale: f64) -> ClipSample {
    let features: IndexMap<String, Tensor2> = specs
        .iter()
        .map(|s| (s.name.clone(), random(rng, seconds, s.dim, scale)))
        .collect();
    ClipSample {
        movie_id: "gradcheck".into(),
        clip_index: index,
        features,
        valence: rng.uniform_range(-0.9, 0.9),
        arousal: rng.uniform_range(-0.9, 0.9),
    }
}

fn small_intra(seed: u64, rng: &mut Rng) -> Result<(IntraClipModel, Vec<ModalitySpec>)> {
    let specs = vec![ModalitySpec::new("m0", 3), ModalitySpec::new("m1", 2)];
    let mut model = IntraClipModel::new(&specs, 2, 3, seed)?;
    model.attach_fusion(seed)?;
    jitter(&mut model.store, rng);
    Ok((model, specs))
}

/// Intra-clip model over two modalities, 10-step clips, batch of 3,
/// through sum fusion and both readout layers.
pub fn intra_case(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let (model, specs) = small_intra(seed, &mut rng)?;
    let clips: Vec<ClipSample> = (0..3).map(|i| random_clip(&mut rng, &specs, 10, i, 1.0)).collect();
    let y: Vec<f64> = clips.iter().map(|c| c.arousal).collect();
    let subset = model.active.clone();
    grad_check(
        |g: &mut Graph| {
            let refs: Vec<&ClipSample> = clips.iter().collect();
            let fused = model.fuse(g, &refs, &subset)?;
            let out = model.readout(g, fused)?;
            clip_loss_on_tape(g, out, &y)
        },
        &model.store,
        GRAD_EPS,
    )
}

/// Context model alone over a batch of two windows of length 2.
pub fn context_case(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let mut ctx = ContextModel::new(3, 2, seed)?;
    jitter(&mut ctx.store, &mut rng);
    let steps: Vec<Tensor2> = (0..2).map(|_| random(&mut rng, 3, 2, 0.8)).collect();
    let y: Vec<Vec<f64>> = (0..2).map(|_| labels(&mut rng, 2)).collect();
    grad_check(
        |g: &mut Graph| {
            let vars: Vec<Var> = steps.iter().map(|s| g.constant(s.clone())).collect();
            let preds = ctx.forward(g, &vars)?;
            window_loss_on_tape(g, &preds, &y)
        },
        &ctx.store,
        GRAD_EPS,
    )
}

/// The whole valence path for one window of two clips: both encoders,
/// sum fusion, the embedding layer, and the context model, all trainable.
/// Inputs are drawn at twice the unit scale: the longest chains here
/// (layer-0 encoder weights through two BiLSTM stacks) otherwise sit
/// closest to the central-difference roundoff floor.
pub fn full_model_case(seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let (intra, specs) = small_intra(seed, &mut rng)?;
    let mut ctx = ContextModel::new(intra.embed, 2, seed)?;
    jitter(&mut ctx.store, &mut rng);
    let mut store = intra.store.clone();
    for (name, p) in ctx.store.iter() {
        store.insert(name, p.value.clone())?;
    }
    let clips: Vec<ClipSample> = (0..2).map(|i| random_clip(&mut rng, &specs, 10, i, 2.0)).collect();
    let y = vec![clips.iter().map(|c| c.valence).collect::<Vec<_>>()];
    let subset = intra.active.clone();
    grad_check(
        |g: &mut Graph| {
            let mut steps = Vec::with_capacity(clips.len());
            for clip in &clips {
                let fused = intra.fuse(g, &[clip], &subset)?;
                steps.push(intra.embedding(g, fused)?);
            }
            let preds = ctx.forward(g, &steps)?;
            window_loss_on_tape(g, &preds, &y)
        },
        &store,
        GRAD_EPS,
    )
}

type CaseFn = fn(u64) -> Result<f64>;

pub const CASES: [(&str, CaseFn); 6] = [
    ("dense", dense_case),
    ("lstm_step_t3", lstm_case),
    ("bilstm_t5", bilstm_case),
    ("intra_clip_2_modalities", intra_case),
    ("context_l2", context_case),
    ("full_window_l2", full_model_case),
];

/// Every case at seeds `seed..seed + seeds`.
pub fn run_suite(seed: u64, seeds: u64) -> Result<Vec<GradCase>> {
    let mut out = Vec::new();
    for (name, case) in CASES {
        for s in seed..seed + seeds {
            out.push(GradCase {
                name,
                seed: s,
                error: case(s)?,
            });
        }
    }
    Ok(out)
}
