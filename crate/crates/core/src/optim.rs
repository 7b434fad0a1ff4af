//! Adam with bias correction, and global-norm gradient clipping.

use crate::error::{Error, Result};
use crate::param::ParamStore;
use crate::tensor::{Float, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub step: u64,
    pub m: Vec<Tensor<F>>,
    pub v: Vec<Tensor<F>>,
}

impl<F: Float> AdamState<F> {
    pub fn new(store: &ParamStore<F>) -> Self {
        AdamState {
            step: 0,
            m: store.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            v: store.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
        }
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. Non-finite norms are left for the
/// optimizer to reject.
pub fn clip_grad_norm<F: Float>(store: &mut ParamStore<F>, max_norm: f64) -> f64 {
    let norm = store
        .iter()
        .flat_map(|p| p.grad.data())
        .map(|g| g.f64() * g.f64())
        .sum::<f64>()
        .sqrt();
    if norm.is_finite() && norm > max_norm {
        let scale = F::of(max_norm / norm);
        for p in store.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g = *g * scale);
        }
    }
    norm
}

/// One Adam update from the gradients held in `store`. A non-finite
/// gradient rejects the whole step and leaves parameters and state intact.
pub fn adam_step<F: Float>(store: &mut ParamStore<F>, state: &mut AdamState<F>, cfg: &AdamConfig) -> Result<()> {
    if let Some(p) = store.iter().find(|p| !p.grad.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = F::of(cfg.beta1);
    let b2 = F::of(cfg.beta2);
    let c1 = F::of(1.0 - cfg.beta1.powi(t));
    let c2 = F::of(1.0 - cfg.beta2.powi(t));
    let lr = F::of(cfg.lr);
    let eps = F::of(cfg.eps);
    for ((p, m), v) in store.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let g = p.grad.data();
        for (((w, m), v), &g) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g)
        {
            *m = b1 * *m + (F::one() - b1) * g;
            *v = b2 * *v + (F::one() - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *w -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
