use serde::{Deserialize, Serialize};

use super::net::{Gradients, ModelParams};
use crate::scalar::Scalar;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

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
            lr: DEFAULT_LEARNING_RATE,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update of every learnable array; increments the step counter.
pub fn adam_step<T: Scalar>(params: &mut ModelParams<T>, grads: &Gradients<T>, cfg: &AdamConfig) {
    params.adam.step += 1;
    let t = params.adam.step as i32;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let c1 = T::one() - T::lit(cfg.beta1.powi(t));
    let c2 = T::one() - T::lit(cfg.beta2.powi(t));
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    for (i, g) in grads.arrays.iter().enumerate() {
        let m = &mut params.adam.m[i];
        let v = &mut params.adam.v[i];
        let p = &mut params.params[i].data;
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (T::one() - b1) * g[j];
            v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::net::Architecture;

    fn small() -> ModelParams<f64> {
        ModelParams::init(Architecture::new(0.125).unwrap(), 11)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = small();
        let before = p.params.clone();
        let g = Gradients::zeros_like(&p);
        adam_step(&mut p, &g, &AdamConfig::default());
        assert_eq!(p.params, before);
        assert_eq!(p.adam.step, 1);

        // stored momentum still moves parameters and decays by beta1
        p.adam.m[0][0] = 0.5;
        adam_step(&mut p, &g, &AdamConfig::default());
        assert_eq!(p.adam.m[0][0], 0.45);
        assert!(p.params[0].data[0] < before[0].data[0]);
    }

    #[test]
    fn first_step_is_unit_lr_against_gradient() {
        let mut p = small();
        let before = p.params[0].data.clone();
        let mut g = Gradients::zeros_like(&p);
        g.arrays[0][0] = 3.0;
        g.arrays[0][1] = -0.002;
        let cfg = AdamConfig::default();
        adam_step(&mut p, &g, &cfg);
        let d0 = p.params[0].data[0] - before[0];
        let d1 = p.params[0].data[1] - before[1];
        assert!((d0 + cfg.lr).abs() < 1e-9);
        assert!((d1 - cfg.lr).abs() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = small();
            let mut g = Gradients::zeros_like(&p);
            g.arrays
                .iter_mut()
                .flatten()
                .enumerate()
                .for_each(|(i, v)| *v = (i as f64).sin());
            for _ in 0..3 {
                adam_step(&mut p, &g, &AdamConfig::default());
            }
            p
        };
        assert_eq!(run(), run());
    }
}
