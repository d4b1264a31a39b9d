//! Synthetic feature packs driven by a latent emotion signal.
//!
//! Each movie draws a bounded AR(1) latent
//! `e_t = clamp(0.95·e_{t−1} + 0.1·η_t, −1, 1)` with `e_{−1} = 0`.
//! Valence is `e_t`, arousal is `2|e_t| − 1`. Informative modality `k`
//! emits `A_k·[e_t, n_t] + ε_t`, where `A_k` (`dim × 2`) is fixed per
//! modality across movies, `n_t ~ N(0, NUISANCE_STD²)` is a per-second
//! nuisance shared by all modalities of the movie, and
//! `ε_t ~ N(0, σ_k²)` with `σ_k = 0.05·(k + 1)`. The optional noise
//! modality is i.i.d. standard normal, independent of `e_t`.

use std::path::Path;

use indexmap::IndexMap;

use super::{write_pack, ModalitySpec, MoviePack};
use crate::error::{Error, Result};
use crate::numcore::{Rng, Tensor2};

pub const AR_COEFF: f64 = 0.95;
pub const AR_NOISE: f64 = 0.1;
pub const NUISANCE_STD: f64 = 0.5;
pub const NOISE_MODALITY: &str = "noise";

const READOUT_STREAM: u64 = 0x5EAD_0000;
const MOVIE_STREAM: u64 = 0x0000_0001_0000_0000;

fn readout(seed: u64, k: usize, dim: usize) -> Tensor2 {
    let mut rng = Rng::derive(seed, READOUT_STREAM + k as u64);
    let data = (0..dim * 2).map(|_| rng.normal()).collect();
    Tensor2::from_vec(dim, 2, data).expect("sized by construction")
}

/// Rounds through `f32` so in-memory packs equal their on-disk form.
fn f32_round(t: Tensor2) -> Tensor2 {
    t.map(|v| v as f32 as f64)
}

/// Builds the packs in memory without touching the filesystem.
pub fn synthesize(
    n_movies: usize,
    seconds: usize,
    specs: &[ModalitySpec],
    seed: u64,
    noise_modality: bool,
) -> Result<Vec<MoviePack>> {
    if seconds < 20 {
        return Err(Error::Config(format!(
            "synthetic movies need at least 20 seconds, got {seconds}"
        )));
    }
    if specs.is_empty() || specs.iter().any(|s| s.dim == 0) {
        return Err(Error::Config("synthetic data needs modalities with positive width".into()));
    }
    let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    if noise_modality {
        names.push(NOISE_MODALITY);
    }
    let mut sorted = names.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != names.len() {
        return Err(Error::Config("modality names must be unique".into()));
    }

    let readouts: Vec<Tensor2> = specs
        .iter()
        .enumerate()
        .map(|(k, s)| readout(seed, k, s.dim))
        .collect();

    let mut packs = Vec::with_capacity(n_movies);
    for movie in 0..n_movies {
        let mut rng = Rng::derive(seed, MOVIE_STREAM + movie as u64);
        let mut latent = Vec::with_capacity(seconds);
        let mut e = 0.0f64;
        for _ in 0..seconds {
            e = (AR_COEFF * e + AR_NOISE * rng.normal()).clamp(-1.0, 1.0);
            latent.push(e);
        }
        let nuisance: Vec<f64> = (0..seconds).map(|_| NUISANCE_STD * rng.normal()).collect();

        let mut features = IndexMap::new();
        for (k, (spec, a)) in specs.iter().zip(&readouts).enumerate() {
            let sigma = 0.05 * (k + 1) as f64;
            let mut data = Vec::with_capacity(seconds * spec.dim);
            for t in 0..seconds {
                for d in 0..spec.dim {
                    let clean = a.get(d, 0) * latent[t] + a.get(d, 1) * nuisance[t];
                    data.push(clean + sigma * rng.normal());
                }
            }
            features.insert(spec.name.clone(), f32_round(Tensor2::from_vec(seconds, spec.dim, data)?));
        }
        if noise_modality {
            let dim = specs[0].dim;
            let data = (0..seconds * dim).map(|_| rng.normal()).collect();
            features.insert(
                NOISE_MODALITY.to_string(),
                f32_round(Tensor2::from_vec(seconds, dim, data)?),
            );
        }
        let labels = Tensor2::from_vec(
            seconds,
            2,
            latent.iter().flat_map(|&e| [e, 2.0 * e.abs() - 1.0]).collect(),
        )?;
        packs.push(MoviePack {
            movie_id: format!("movie_{movie:03}"),
            seconds,
            features,
            labels: f32_round(labels),
        });
    }
    Ok(packs)
}

/// Generates packs and writes each to `out/<movie_id>/`.
pub fn gen_synthetic(
    out: impl AsRef<Path>,
    n_movies: usize,
    seconds: usize,
    specs: &[ModalitySpec],
    seed: u64,
    noise_modality: bool,
) -> Result<Vec<MoviePack>> {
    let packs = synthesize(n_movies, seconds, specs, seed, noise_modality)?;
    for p in &packs {
        write_pack(p, out.as_ref().join(&p.movie_id))?;
    }
    Ok(packs)
}
