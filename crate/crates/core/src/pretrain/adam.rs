use std::collections::BTreeMap;

use crate::encoder::ParameterStore;
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam on one slice, no weight decay. `step` is 1-based.
pub fn adam_update<T: Float>(w: &mut [T], g: &[T], m: &mut [T], v: &mut [T], cfg: &AdamConfig, step: u64) {
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powf(step as f64);
    let c2 = 1.0 - b2.powf(step as f64);
    for i in 0..w.len() {
        let gi = g[i].to_f64();
        let mi = b1 * m[i].to_f64() + (1.0 - b1) * gi;
        let vi = b2 * v[i].to_f64() + (1.0 - b2) * gi * gi;
        m[i] = T::from_f64(mi);
        v[i] = T::from_f64(vi);
        let delta = cfg.lr * (mi / c1) / ((vi / c2).sqrt() + cfg.eps);
        w[i] = T::from_f64(w[i].to_f64() - delta);
    }
}

/// First and second moment estimates per parameter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState<T: Float = f64> {
    pub m: BTreeMap<String, Tensor<T>>,
    pub v: BTreeMap<String, Tensor<T>>,
    /// Number of completed steps.
    pub step: u64,
}

impl<T: Float> AdamState<T> {
    pub fn new() -> Self {
        Self {
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            step: 0,
        }
    }
}

/// One optimizer step over every gradient in `grads`. Nothing is modified
/// when any gradient is non-finite.
pub fn adam_step<T: Float>(
    params: &mut ParameterStore<T>,
    grads: &BTreeMap<String, Tensor<T>>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    let step = state.step + 1;
    for (name, g) in grads {
        let p = params.get(name)?;
        if p.shape() != g.shape() {
            return Err(Error::shape("adam_step", p.shape(), g.shape()));
        }
        if let Some(m) = state.m.get(name) {
            if m.shape() != g.shape() {
                return Err(Error::shape("adam_step state", m.shape(), g.shape()));
            }
        }
        if g.data().iter().any(|x| !x.is_finite()) {
            return Err(Error::Training {
                step,
                reason: format!("non-finite gradient for {name}"),
            });
        }
    }
    for (name, g) in grads {
        let m = state.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.shape()));
        let v = state.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.shape()));
        let w = params.get_mut(name)?;
        adam_update(w.data_mut(), g.data(), m.data_mut(), v.data_mut(), cfg, step);
    }
    state.step = step;
    Ok(())
}
