use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..1.0;
        if !unit.contains(&self.beta1) || !unit.contains(&self.beta2) {
            return Err(Error::Config(format!(
                "adam betas must lie in [0, 1): {} {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::Config("adam learning rate and epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m: Tensor2,
    v: Tensor2,
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    moments: HashMap<String, Moments>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            moments: HashMap::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every parameter selected by `include`, then clears
    /// all gradients in the store.
    pub fn step_filtered(&mut self, store: &mut ParamStore, include: impl Fn(&str) -> bool) -> Result<()> {
        if let Some((name, _)) = store.iter().find(|(n, p)| include(n) && !p.populated) {
            return Err(Error::Contract(format!("no gradient for parameter {name}")));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (name, p) in store.iter_mut() {
            if !include(name) {
                continue;
            }
            let (r, c) = p.value.shape();
            let mom = self.moments.entry(name.to_string()).or_insert_with(|| Moments {
                m: Tensor2::zeros(r, c),
                v: Tensor2::zeros(r, c),
            });
            let g = p.grad.data();
            let m = mom.m.data_mut();
            let v = mom.v.data_mut();
            for (i, theta) in p.value.data_mut().iter_mut().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        store.zero_grad();
        Ok(())
    }

    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        self.step_filtered(store, |_| true)
    }
}
