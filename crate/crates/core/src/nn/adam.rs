use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Gradients, Network, Scalar};
use crate::{Error, Result};

/// Adam hyperparameters; defaults are the published ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of a parameter slice. `t` is the step
/// number after incrementing (starts at 1).
pub fn adam_update<T: Scalar>(cfg: &AdamConfig, t: u64, params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T]) {
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let one = T::one();
    let c1 = T::lit(1.0 - libm::pow(cfg.beta1, t as f64));
    let c2 = T::lit(1.0 - libm::pow(cfg.beta2, t as f64));
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Moment accumulators mirroring a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<(Vec<T>, Vec<T>)>,
    v: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &Network<T>, config: AdamConfig) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| (vec![T::zero(); l.weights.len()], vec![T::zero(); l.bias.len()]))
                .collect::<Vec<_>>()
        };
        Self {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Apply one step to `net`. Fails without touching anything if shapes
    /// disagree or any gradient is non-finite.
    pub fn step(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.layers.len() != net.layers.len()
            || self.m.len() != net.layers.len()
            || net
                .layers
                .iter()
                .zip(&grads.layers)
                .zip(&self.m)
                .any(|((l, g), m)| {
                    g.weights.len() != l.weights.len()
                        || g.bias.len() != l.bias.len()
                        || m.0.len() != l.weights.len()
                        || m.1.len() != l.bias.len()
                })
        {
            return Err(Error::Shape("gradients, optimizer state and network disagree".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients"));
        }
        self.t += 1;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            adam_update(&self.config, self.t, &mut layer.weights, &g.weights, mw, vw);
            adam_update(&self.config, self.t, &mut layer.bias, &g.bias, mb, vb);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.5f64, -1.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&cfg, 1, &mut p, &[0.0, 0.0], &mut m, &mut v);
        assert_eq!(p, vec![0.5, -1.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = g and v_hat = g^2 after bias correction, so the step is
        // lr * g / (|g| + eps).
        let cfg = AdamConfig::default();
        for g in [3.0f64, -0.02, 1e-3] {
            let mut p = vec![1.0f64];
            let (mut m, mut v) = (vec![0.0], vec![0.0]);
            adam_update(&cfg, 1, &mut p, &[g], &mut m, &mut v);
            let expected = 1.0 - cfg.lr * g / (g.abs() + cfg.eps);
            assert!((p[0] - expected).abs() < 1e-15, "{g}: {} vs {expected}", p[0]);
            assert!(((1.0 - p[0]).abs() - cfg.lr).abs() < 1e-7);
        }
    }
}
