use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    first: Tensor,
    second: Tensor,
}

/// Named parameters plus their Adam state.
///
/// Iteration order is the lexicographic order of names, which keeps
/// checkpoints and gradient bookkeeping deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    params: BTreeMap<String, Tensor>,
    moments: BTreeMap<String, Moments>,
    step: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        let moments = Moments {
            first: Tensor::zeros(value.rows(), value.cols()),
            second: Tensor::zeros(value.rows(), value.cols()),
        };
        self.moments.insert(name.clone(), moments);
        self.params.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn expect(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::invalid(format!("missing parameter {name:?}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Direct mutable access; bypasses optimizer state (used by gradient checks).
    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub(crate) fn into_params(self) -> BTreeMap<String, Tensor> {
        self.params
    }

    pub(crate) fn from_params(params: BTreeMap<String, Tensor>) -> Self {
        let mut store = ParameterStore::new();
        for (name, value) in params {
            store.insert(name, value);
        }
        store
    }

    /// One bias-corrected Adam update. Parameters without an entry in
    /// `grads` are treated as having zero gradient.
    pub fn adam_step(
        &mut self,
        grads: &BTreeMap<String, Tensor>,
        config: &AdamConfig,
    ) -> Result<()> {
        for (name, g) in grads {
            let p = self.params.get(name).ok_or_else(|| {
                Error::invalid(format!("gradient for unknown parameter {name:?}"))
            })?;
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!(
                        "{name}: parameter {:?}, gradient {:?}",
                        p.shape(),
                        g.shape()
                    ),
                ));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);
        for (name, p) in self.params.iter_mut() {
            let m = self.moments.get_mut(name).expect("moments track params");
            let g = grads.get(name);
            for i in 0..p.len() {
                let gi = g.map_or(0.0, |g| g.values()[i]);
                let mi = &mut m.first.values_mut()[i];
                *mi = config.beta1 * *mi + (1.0 - config.beta1) * gi;
                let m_hat = *mi / bc1;
                let vi = &mut m.second.values_mut()[i];
                *vi = config.beta2 * *vi + (1.0 - config.beta2) * gi * gi;
                let v_hat = *vi / bc2;
                p.values_mut()[i] -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
            }
        }
        Ok(())
    }
}
