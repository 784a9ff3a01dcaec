use serde::{Deserialize, Serialize};

use super::net::Output;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability clipping bound for the cross entropy.
pub const BCE_EPS: f64 = 1e-7;
/// Normalizer that brings the squared error to the scale of the cross entropy.
pub const DEFAULT_LOSS_K: f64 = 0.0066;

/// `total = w * class + (1 - w) * reg / k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w: f64,
    pub k: f64,
}

impl LossWeights {
    pub fn new(w: f64, k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::config(format!("loss weight w = {w} outside [0, 1]")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::config(format!(
                "loss normalizer k = {k} must be positive"
            )));
        }
        Ok(Self { w, k })
    }

    pub fn classification() -> Self {
        Self {
            w: 1.0,
            k: DEFAULT_LOSS_K,
        }
    }

    pub fn regression() -> Self {
        Self {
            w: 0.0,
            k: DEFAULT_LOSS_K,
        }
    }
}

pub fn loss_regression<T: Scalar>(pred: &[T], target: &[T]) -> T {
    let n = T::from_usize_lossy(pred.len());
    pred.iter()
        .zip(target)
        .map(|(&p, &y)| (p - y) * (p - y))
        .sum::<T>()
        / n
}

#[inline]
fn clip<T: Scalar>(p: T) -> T {
    let eps = T::lit(BCE_EPS);
    p.max(eps).min(T::one() - eps)
}

/// Nonnegative binary cross entropy with clipped probabilities.
pub fn loss_classification<T: Scalar>(prob_on: &[T], target: &[T]) -> T {
    let n = T::from_usize_lossy(prob_on.len());
    let s: T = prob_on
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            let q = clip(p);
            y * q.ln() + (T::one() - y) * (T::one() - q).ln()
        })
        .sum();
    -s / n
}

pub fn loss_total<T: Scalar>(class_loss: T, reg_loss: T, weights: LossWeights) -> T {
    let w = T::lit(weights.w);
    w * class_loss + (T::one() - w) * reg_loss / T::lit(weights.k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub class: T,
    pub reg: T,
    pub total: T,
}

/// Batch targets: normalized power and binary status, each `n x 1 x 480`.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets<T> {
    pub power: Tensor<T>,
    pub status: Tensor<T>,
}

/// Batch-mean losses and their gradients w.r.t. the status probabilities
/// (`n x 2 x 480`, channel 0 receives none) and the power output.
pub fn loss_and_output_grads<T: Scalar>(
    out: &Output<T>,
    targets: &Targets<T>,
    weights: LossWeights,
) -> (LossParts<T>, Tensor<T>, Tensor<T>) {
    let n = out.power.batch;
    let len = out.power.len;
    let m = T::from_usize_lossy(n * len);
    let w = T::lit(weights.w);
    let reg_scale = (T::one() - w) / T::lit(weights.k);
    let eps = T::lit(BCE_EPS);

    let mut class = T::zero();
    let mut reg = T::zero();
    let mut d_status = Tensor::zeros(n, 2, len);
    let mut d_power = Tensor::zeros(n, 1, len);
    for b in 0..n {
        let p = out.prob_on(b);
        let y = targets.status.row(b, 0);
        let ds = d_status.row_mut(b, 1);
        for t in 0..len {
            let q = clip(p[t]);
            class -= y[t] * q.ln() + (T::one() - y[t]) * (T::one() - q).ln();
            ds[t] = if p[t] <= eps || p[t] >= T::one() - eps {
                T::zero()
            } else {
                w * (-(y[t] / q) + (T::one() - y[t]) / (T::one() - q)) / m
            };
        }
        let pw = out.power(b);
        let yp = targets.power.row(b, 0);
        let dp = d_power.row_mut(b, 0);
        for t in 0..len {
            let e = pw[t] - yp[t];
            reg += e * e;
            dp[t] = reg_scale * T::lit(2.0) * e / m;
        }
    }
    let class = class / m;
    let reg = reg / m;
    (
        LossParts {
            class,
            reg,
            total: loss_total(class, reg, weights),
        },
        d_status,
        d_power,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_cases() {
        assert_eq!(loss_regression(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        let p = vec![0.1; 480];
        let y = vec![0.0; 480];
        assert!((loss_regression(&p, &y) - 0.01f64).abs() < 1e-15);
        assert_eq!(loss_regression(&[0.0, 1.0], &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn classification_cases() {
        let l = loss_classification(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]);
        assert!((0.0..=1.2e-7).contains(&l));
        let half = loss_classification(&[0.5; 8], &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((half - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss_classification(&[0.25], &[1.0]) - 1.3862943611198906f64).abs() < 1e-12);
    }

    #[test]
    fn total_cases() {
        let wt = LossWeights::new(1.0, DEFAULT_LOSS_K).unwrap();
        assert_eq!(loss_total(0.3, 5.0, wt), 0.3);
        let wt = LossWeights::new(0.0, DEFAULT_LOSS_K).unwrap();
        assert_eq!(loss_total(0.3, 0.0132, wt), 0.0132 / 0.0066);
        let wt = LossWeights::new(0.5, DEFAULT_LOSS_K).unwrap();
        assert!((loss_total(0.6, 0.0066, wt) - 0.8f64).abs() < 1e-15);
        assert!(LossWeights::new(1.1, 0.0066).is_err());
        assert!(LossWeights::new(0.5, 0.0).is_err());
    }
}
