use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
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
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.eps > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Adam moments for a fixed list of parameter buffers.
///
/// Moments are kept flat in the same canonical buffer order the caller passes
/// to [`Adam::step_buffers`]; `sizes` records the expected buffer lengths.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    sizes: Vec<usize>,
    step: u64,
    block_scaled: bool,
}

impl Adam {
    pub fn new(config: AdamConfig, sizes: Vec<usize>) -> Self {
        let total = sizes.iter().sum();
        Adam {
            config,
            first: vec![0.0; total],
            second: vec![0.0; total],
            sizes,
            step: 0,
            block_scaled: false,
        }
    }

    pub fn for_mlp(mlp: &Mlp, config: AdamConfig) -> Self {
        let sizes = mlp
            .weights()
            .iter()
            .zip(mlp.biases())
            .flat_map(|(w, b)| [w.len(), b.len()])
            .collect();
        Adam::new(config, sizes)
    }

    /// Normalizes each buffer by the root of its mean second moment instead
    /// of per coordinate, which keeps relative gradient magnitudes within a
    /// buffer.
    pub fn block_scaled(mut self) -> Self {
        self.block_scaled = true;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Changes the learning rate for subsequent steps (for schedules).
    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second
    }

    /// One bias-corrected Adam update of `mlp` in place.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<()> {
        let g = grads.buffers();
        let mut p = mlp.buffers_mut();
        self.step_buffers(&mut p, &g)
    }

    /// Same update over arbitrary flat buffers. All gradients are checked for
    /// finiteness before any parameter is touched.
    pub fn step_buffers(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.sizes.len() || grads.len() != self.sizes.len() {
            return Err(Error::contract(format!(
                "Adam tracks {} buffers, got {} parameter and {} gradient buffers",
                self.sizes.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, ((p, g), &n)) in params.iter().zip(grads).zip(&self.sizes).enumerate() {
            if p.len() != n || g.len() != n {
                return Err(Error::contract(format!(
                    "buffer {i}: expected length {n}, got parameters {} and gradients {}",
                    p.len(),
                    g.len()
                )));
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::divergence(
                "Adam step (non-finite gradient)",
                Some(self.step as usize),
            ));
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let mut offset = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            let m = &mut self.first[offset..offset + g.len()];
            let v = &mut self.second[offset..offset + g.len()];
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            }
            if self.block_scaled {
                let scale = (v.iter().sum::<f64>() / v.len().max(1) as f64 / c2).sqrt() + eps;
                for i in 0..g.len() {
                    p[i] -= lr * (m[i] / c1) / scale;
                }
            } else {
                for i in 0..g.len() {
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    p[i] -= lr * mh / (vh.sqrt() + eps);
                }
            }
            offset += g.len();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use approx::assert_abs_diff_eq;

    fn scalar_adam_oracle(grads: &[f64], start: f64, cfg: AdamConfig) -> f64 {
        let (mut m, mut v, mut p) = (0.0f64, 0.0f64, start);
        for (t, g) in grads.iter().enumerate() {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let mh = m / (1.0 - cfg.beta1.powi(t as i32 + 1));
            let vh = v / (1.0 - cfg.beta2.powi(t as i32 + 1));
            p -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
        p
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut net = Mlp::init(&[2, 3, 1], Activation::Relu, 3).unwrap();
        let before = net.clone();
        let mut adam = Adam::for_mlp(&net, AdamConfig::default());
        let zero = Gradients::zeros_like(&net);
        adam.step(&mut net, &zero).unwrap();
        assert_eq!(net, before);
        assert!(adam.first_moment().iter().all(|&m| m == 0.0));
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::with_lr(0.01);
        let mut p = [1.0];
        let mut adam = Adam::new(cfg, vec![1]);
        adam.step_buffers(&mut [&mut p[..]], &[&[1.0][..]]).unwrap();
        // m̂ = 1, v̂ = 1, step = 0.01 / (1 + 1e-8)
        assert_abs_diff_eq!(1.0 - p[0], 0.01 / (1.0 + 1e-8), epsilon = 1e-15);
    }

    #[test]
    fn successive_steps_match_scalar_oracle() {
        let cfg = AdamConfig::default();
        let mut p = [0.3];
        let mut adam = Adam::new(cfg, vec![1]);
        let grads = [0.7, 0.7];
        for g in grads {
            adam.step_buffers(&mut [&mut p[..]], &[&[g][..]]).unwrap();
        }
        assert_abs_diff_eq!(p[0], scalar_adam_oracle(&grads, 0.3, cfg), epsilon = 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_divergence_and_leaves_state() {
        let mut p = [0.5, 0.5];
        let mut adam = Adam::new(AdamConfig::default(), vec![2]);
        let err = adam
            .step_buffers(&mut [&mut p[..]], &[&[1.0, f64::NAN][..]])
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
        assert_eq!(p, [0.5, 0.5]);
        assert_eq!(adam.steps_taken(), 0);
    }

    #[test]
    fn buffer_shape_mismatch_is_contract_error() {
        let mut p = [0.0; 3];
        let mut adam = Adam::new(AdamConfig::default(), vec![2]);
        assert!(matches!(
            adam.step_buffers(&mut [&mut p[..]], &[&[0.0; 3][..]]),
            Err(Error::Contract(_))
        ));
    }
}
