//! Two-level power reconstruction from a status series and the resulting
//! intrinsic error of a thresholding method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{PowerSeries, StatusSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnOffLevels<T> {
    pub p_on: T,
    pub p_off: T,
}

impl<T: Scalar> OnOffLevels<T> {
    /// `p_on >= p_off >= 0`.
    pub fn is_ordered(&self) -> bool {
        self.p_on >= self.p_off && self.p_off >= T::zero()
    }
}

/// How ON/OFF levels are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LevelMode {
    /// Mean power over the samples in each state.
    #[default]
    Conditional,
    /// State-masked power summed and divided by the total sample count.
    Literal,
}

/// Accumulates level sums over several segments (e.g. all training windows).
#[derive(Debug, Clone, Copy, Default)]
pub struct LevelAccumulator<T> {
    on_sum: T,
    off_sum: T,
    on_count: usize,
    off_count: usize,
    // value shared by every sample of a state, if any; keeps constant states exact
    on_const: Option<T>,
    off_const: Option<T>,
}

fn track<T: Scalar>(c: &mut Option<T>, first: bool, p: T) {
    if first {
        *c = Some(p);
    } else if *c != Some(p) {
        *c = None;
    }
}

impl<T: Scalar> LevelAccumulator<T> {
    pub fn new() -> Self {
        Self {
            on_sum: T::zero(),
            off_sum: T::zero(),
            on_count: 0,
            off_count: 0,
            on_const: None,
            off_const: None,
        }
    }

    pub fn add(&mut self, power: &[T], status: &[u8]) -> Result<()> {
        if power.len() != status.len() {
            return Err(Error::input(format!(
                "power has {} samples but status has {}",
                power.len(),
                status.len()
            )));
        }
        for (&p, &s) in power.iter().zip(status) {
            if s == 1 {
                track(&mut self.on_const, self.on_count == 0, p);
                self.on_sum += p;
                self.on_count += 1;
            } else {
                track(&mut self.off_const, self.off_count == 0, p);
                self.off_sum += p;
                self.off_count += 1;
            }
        }
        Ok(())
    }

    pub fn levels(&self, mode: LevelMode) -> OnOffLevels<T> {
        let div = |sum: T, n: usize| {
            if n == 0 {
                T::zero()
            } else {
                sum / T::from_usize_lossy(n)
            }
        };
        let levels = match mode {
            LevelMode::Conditional => OnOffLevels {
                p_on: self
                    .on_const
                    .unwrap_or_else(|| div(self.on_sum, self.on_count)),
                p_off: self
                    .off_const
                    .unwrap_or_else(|| div(self.off_sum, self.off_count)),
            },
            LevelMode::Literal => {
                let n = self.on_count + self.off_count;
                OnOffLevels {
                    p_on: div(self.on_sum, n),
                    p_off: div(self.off_sum, n),
                }
            }
        };
        if !levels.is_ordered() {
            log::warn!(
                "reconstruction levels out of order: p_on = {}, p_off = {}",
                levels.p_on,
                levels.p_off
            );
        }
        levels
    }
}

pub fn compute_levels<T: Scalar>(
    power: &PowerSeries<T>,
    status: &StatusSeries,
) -> Result<OnOffLevels<T>> {
    compute_levels_with(power, status, LevelMode::Conditional)
}

pub fn compute_levels_with<T: Scalar>(
    power: &PowerSeries<T>,
    status: &StatusSeries,
    mode: LevelMode,
) -> Result<OnOffLevels<T>> {
    let mut acc = LevelAccumulator::new();
    acc.add(power.values(), status.values())?;
    Ok(acc.levels(mode))
}

/// Binary power: `p_on` where ON, `p_off` elsewhere.
pub fn reconstruct_values<T: Scalar>(status: &[u8], levels: OnOffLevels<T>) -> Vec<T> {
    status
        .iter()
        .map(|&s| if s == 1 { levels.p_on } else { levels.p_off })
        .collect()
}

pub fn reconstruct_binary<T: Scalar>(
    status: &StatusSeries,
    levels: OnOffLevels<T>,
) -> Result<PowerSeries<T>> {
    if levels.p_on < T::zero() || levels.p_off < T::zero() {
        return Err(Error::input("reconstruction levels must be nonnegative"));
    }
    PowerSeries::new(
        reconstruct_values(status.values(), levels),
        status.sampling(),
        "reconstructed",
    )
}

/// Mean absolute difference between `power` and `levels` applied to `status`.
pub fn reconstruction_mae<T: Scalar>(
    power: &[T],
    status: &[u8],
    levels: OnOffLevels<T>,
) -> Result<T> {
    if power.len() != status.len() || power.is_empty() {
        return Err(Error::input(
            "reconstruction error needs equal, nonempty lengths",
        ));
    }
    let total: T = power
        .iter()
        .zip(status)
        .map(|(&p, &s)| (p - if s == 1 { levels.p_on } else { levels.p_off }).abs())
        .sum();
    Ok(total / T::from_usize_lossy(power.len()))
}

/// Reconstruction MAE with levels fitted on the same series.
pub fn intrinsic_error<T: Scalar>(power: &PowerSeries<T>, status: &StatusSeries) -> Result<T> {
    let levels = compute_levels(power, status)?;
    reconstruction_mae(power.values(), status.values(), levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SamplingSpec;

    fn pair(p: Vec<f64>, s: Vec<u8>) -> (PowerSeries<f64>, StatusSeries) {
        let sp = SamplingSpec::new(60).unwrap();
        (
            PowerSeries::new(p, sp, "x").unwrap(),
            StatusSeries::new(s, sp).unwrap(),
        )
    }

    #[test]
    fn separable_levels() {
        let (p, s) = pair(vec![0., 0., 100., 100.], vec![0, 0, 1, 1]);
        assert_eq!(
            compute_levels(&p, &s).unwrap(),
            OnOffLevels {
                p_on: 100.0,
                p_off: 0.0
            }
        );
    }

    #[test]
    fn conditional_means() {
        let (p, s) = pair(vec![10., 20., 300.], vec![0, 0, 1]);
        assert_eq!(
            compute_levels(&p, &s).unwrap(),
            OnOffLevels {
                p_on: 300.0,
                p_off: 15.0
            }
        );
        let lit = compute_levels_with(&p, &s, LevelMode::Literal).unwrap();
        assert_eq!(
            lit,
            OnOffLevels {
                p_on: 100.0,
                p_off: 10.0
            }
        );
    }

    #[test]
    fn empty_state_is_zero() {
        let (p, s) = pair(vec![10., 20.], vec![0, 0]);
        assert_eq!(compute_levels(&p, &s).unwrap().p_on, 0.0);
    }

    #[test]
    fn reconstruct_cases() {
        let sp = SamplingSpec::new(60).unwrap();
        let s = StatusSeries::new(vec![1, 0, 1], sp).unwrap();
        let r = reconstruct_binary(
            &s,
            OnOffLevels {
                p_on: 100.0,
                p_off: 5.0,
            },
        )
        .unwrap();
        assert_eq!(r.values(), &[100.0, 5.0, 100.0]);
        let s = StatusSeries::new(vec![0, 0], sp).unwrap();
        let r = reconstruct_binary(
            &s,
            OnOffLevels {
                p_on: 0.0,
                p_off: 0.0,
            },
        )
        .unwrap();
        assert_eq!(r.values(), &[0.0, 0.0]);
        let s = StatusSeries::new(vec![1, 1], sp).unwrap();
        let r = reconstruct_binary(
            &s,
            OnOffLevels {
                p_on: 7.0,
                p_off: 1.0,
            },
        )
        .unwrap();
        assert_eq!(r.values(), &[7.0, 7.0]);
    }

    #[test]
    fn intrinsic_error_cases() {
        let (p, s) = pair(vec![0., 100., 100., 0.], vec![0, 1, 1, 0]);
        assert_eq!(intrinsic_error(&p, &s).unwrap(), 0.0);
        let (p, s) = pair(vec![0., 10., 0., 10.], vec![0, 1, 0, 1]);
        assert_eq!(intrinsic_error(&p, &s).unwrap(), 0.0);
        let (p, s) = pair(vec![0., 8., 12.], vec![0, 1, 1]);
        assert!((intrinsic_error(&p, &s).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        let sp = SamplingSpec::new(60).unwrap();
        let p = PowerSeries::new(vec![1.0, 2.0], sp, "x").unwrap();
        let s = StatusSeries::new(vec![1], sp).unwrap();
        assert!(compute_levels(&p, &s).is_err());
    }
}
