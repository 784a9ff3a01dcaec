//! Uniformly sampled power and status series, resampling and windowing.
//!
//! Timestamps are implicit: sample `i` sits at `i * period_seconds`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Input window length in samples.
pub const INPUT_LEN: usize = 510;
/// Target window length in samples.
pub const OUTPUT_LEN: usize = 480;
/// Samples trimmed from each side of the input span to obtain the target span.
pub const TARGET_OFFSET: usize = (INPUT_LEN - OUTPUT_LEN) / 2;
/// Overlap between consecutive input windows.
pub const DEFAULT_OVERLAP: usize = INPUT_LEN - OUTPUT_LEN;
/// Stride that makes consecutive target spans tile time with no gap.
pub const DEFAULT_STRIDE: usize = INPUT_LEN - DEFAULT_OVERLAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplingSpec {
    period_seconds: u32,
}

impl SamplingSpec {
    pub fn new(period_seconds: u32) -> Result<Self> {
        if period_seconds == 0 {
            return Err(Error::config("sampling period must be at least 1 second"));
        }
        Ok(Self { period_seconds })
    }

    pub fn period_seconds(&self) -> u32 {
        self.period_seconds
    }

    /// Integer factor `k` such that `target = k * self`.
    pub fn factor_to(&self, target: SamplingSpec) -> Result<usize> {
        if !target.period_seconds.is_multiple_of(self.period_seconds) {
            return Err(Error::config(format!(
                "target period {} s is not a multiple of source period {} s",
                target.period_seconds, self.period_seconds
            )));
        }
        Ok((target.period_seconds / self.period_seconds) as usize)
    }

    /// Converts a duration to a whole number of samples, rounding up.
    pub fn seconds_to_samples(&self, seconds: f64) -> usize {
        if seconds <= 0.0 {
            0
        } else {
            (seconds / self.period_seconds as f64).ceil() as usize
        }
    }
}

/// Nonnegative power readings in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries<T> {
    values: Vec<T>,
    sampling: SamplingSpec,
    label: String,
}

impl<T: Scalar> PowerSeries<T> {
    pub fn new(values: Vec<T>, sampling: SamplingSpec, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(Error::input(format!("power series '{label}' is empty")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::input(format!(
                "power series '{label}' has an invalid reading {} at index {i}",
                values[i]
            )));
        }
        Ok(Self {
            values,
            sampling,
            label,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn sampling(&self) -> SamplingSpec {
        self.sampling
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Contiguous sub-range `[start, end)` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.values.len() {
            return Err(Error::input(format!(
                "slice {start}..{end} out of range for length {}",
                self.values.len()
            )));
        }
        Self::new(
            self.values[start..end].to_vec(),
            self.sampling,
            self.label.clone(),
        )
    }
}

/// Binary ON/OFF sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusSeries {
    values: Vec<u8>,
    sampling: SamplingSpec,
}

impl StatusSeries {
    pub fn new(values: Vec<u8>, sampling: SamplingSpec) -> Result<Self> {
        if let Some(i) = values.iter().position(|&v| v > 1) {
            return Err(Error::input(format!(
                "status value {} at index {i} is not 0/1",
                values[i]
            )));
        }
        Ok(Self { values, sampling })
    }

    pub fn from_bools(values: impl IntoIterator<Item = bool>, sampling: SamplingSpec) -> Self {
        Self {
            values: values.into_iter().map(u8::from).collect(),
            sampling,
        }
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    pub fn sampling(&self) -> SamplingSpec {
        self.sampling
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn count_on(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowKind {
    Regression,
    Classification,
}

/// One supervised example: an input span of the aggregate and the centered
/// target span of one appliance.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair<T> {
    pub input: Vec<T>,
    pub target: Vec<T>,
    pub kind: WindowKind,
    /// Mean of the raw input window, subtracted during normalization.
    pub window_mean_watts: T,
    /// Index of the first input sample in the source series.
    pub start: usize,
}

impl<T: Scalar> WindowPair<T> {
    /// Index range of the target in the source series.
    pub fn target_range(&self) -> std::ops::Range<usize> {
        let s = self.start + TARGET_OFFSET;
        s..s + OUTPUT_LEN
    }
}

/// Block-mean downsampling to an integer multiple of the source period.
pub fn resample_mean<T: Scalar>(
    series: &PowerSeries<T>,
    target: SamplingSpec,
) -> Result<PowerSeries<T>> {
    let k = series.sampling.factor_to(target)?;
    if k == 1 {
        return Ok(series.clone());
    }
    if series.len() < k {
        return Err(Error::input(format!(
            "series '{}' has {} samples, fewer than one resampling block of {k}",
            series.label,
            series.len()
        )));
    }
    let kt = T::from_usize_lossy(k);
    let values = series
        .values
        .chunks_exact(k)
        .map(|block| block.iter().copied().sum::<T>() / kt)
        .collect();
    PowerSeries::new(values, target, series.label.clone())
}

/// Number of windows produced by [`windowize`] for a series of length `n`.
pub fn window_count(n: usize, stride: usize) -> usize {
    if n < INPUT_LEN || stride == 0 {
        0
    } else {
        (n - INPUT_LEN) / stride + 1
    }
}

/// Cuts aligned aggregate/appliance series into raw (un-normalized) regression pairs.
pub fn windowize<T: Scalar>(
    aggregate: &PowerSeries<T>,
    appliance: &PowerSeries<T>,
    stride: usize,
) -> Result<Vec<WindowPair<T>>> {
    if aggregate.len() != appliance.len() {
        return Err(Error::input(format!(
            "aggregate has {} samples but '{}' has {}",
            aggregate.len(),
            appliance.label,
            appliance.len()
        )));
    }
    if aggregate.sampling != appliance.sampling {
        return Err(Error::input("aggregate and appliance sampling differ"));
    }
    if stride == 0 {
        return Err(Error::config("window stride must be positive"));
    }
    if aggregate.len() < INPUT_LEN {
        return Err(Error::input(format!(
            "series length {} is shorter than one input window ({INPUT_LEN})",
            aggregate.len()
        )));
    }
    let n = window_count(aggregate.len(), stride);
    Ok((0..n)
        .map(|j| {
            let start = j * stride;
            let t0 = start + TARGET_OFFSET;
            WindowPair {
                input: aggregate.values[start..start + INPUT_LEN].to_vec(),
                target: appliance.values[t0..t0 + OUTPUT_LEN].to_vec(),
                kind: WindowKind::Regression,
                window_mean_watts: T::zero(),
                start,
            }
        })
        .collect())
}

/// Replaces every pair's target with the matching slice of `status`.
pub fn with_status_targets<T: Scalar>(
    pairs: &[WindowPair<T>],
    status: &StatusSeries,
) -> Result<Vec<WindowPair<T>>> {
    pairs
        .iter()
        .map(|p| {
            let r = p.target_range();
            if r.end > status.len() {
                return Err(Error::input(format!(
                    "status series of length {} does not cover window at {}",
                    status.len(),
                    p.start
                )));
            }
            Ok(WindowPair {
                input: p.input.clone(),
                target: status.values[r]
                    .iter()
                    .map(|&s| if s == 1 { T::one() } else { T::zero() })
                    .collect(),
                kind: WindowKind::Classification,
                window_mean_watts: p.window_mean_watts,
                start: p.start,
            })
        })
        .collect()
}

/// Majority-vote downsampling of a status series (ON when at least half of a block is ON).
pub fn resample_status_majority(
    status: &StatusSeries,
    target: SamplingSpec,
) -> Result<StatusSeries> {
    let k = status.sampling.factor_to(target)?;
    if k == 1 {
        return Ok(status.clone());
    }
    if status.len() < k {
        return Err(Error::input(
            "status series shorter than one resampling block",
        ));
    }
    Ok(StatusSeries::from_bools(
        status
            .values
            .chunks_exact(k)
            .map(|b| 2 * b.iter().filter(|&&v| v == 1).count() >= k),
        target,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(p: u32) -> SamplingSpec {
        SamplingSpec::new(p).unwrap()
    }

    fn ps(values: Vec<f64>, p: u32) -> PowerSeries<f64> {
        PowerSeries::new(values, s(p), "x").unwrap()
    }

    #[test]
    fn resample_constant_blocks() {
        let x = ps(vec![6., 6., 6., 6., 6., 6., 0., 0., 0., 0., 0., 0.], 6);
        let y = resample_mean(&x, s(36)).unwrap();
        assert_eq!(y.values(), &[6.0, 0.0]);
        assert_eq!(y.sampling().period_seconds(), 36);
    }

    #[test]
    fn resample_pairs() {
        let y = resample_mean(&ps(vec![1., 2., 3., 4.], 6), s(12)).unwrap();
        assert_eq!(y.values(), &[1.5, 3.5]);
    }

    #[test]
    fn resample_identity_and_tail_drop() {
        let x = ps(vec![1., 2., 3.], 6);
        assert_eq!(resample_mean(&x, s(6)).unwrap(), x);
        assert_eq!(resample_mean(&x, s(12)).unwrap().values(), &[1.5]);
    }

    #[test]
    fn resample_errors() {
        let x = ps(vec![1., 2., 3.], 6);
        assert!(matches!(resample_mean(&x, s(9)), Err(Error::Config(_))));
        assert!(matches!(resample_mean(&x, s(60)), Err(Error::Input(_))));
    }

    #[test]
    fn invalid_series_rejected() {
        assert!(PowerSeries::<f64>::new(vec![], s(1), "a").is_err());
        assert!(PowerSeries::new(vec![1.0, -1.0], s(1), "a").is_err());
        assert!(PowerSeries::new(vec![f64::NAN], s(1), "a").is_err());
        assert!(StatusSeries::new(vec![0, 2], s(1)).is_err());
        assert!(SamplingSpec::new(0).is_err());
    }

    #[test]
    fn two_windows_overlap_by_thirty() {
        let x = ps((0..990).map(|i| i as f64).collect(), 60);
        let w = windowize(&x, &x, DEFAULT_STRIDE).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].start, 480);
        assert_eq!(w[1].input[0], 480.0);
        // ramp: first target value is index 15
        assert_eq!(w[0].target[0], 15.0);
        assert_eq!(w[0].input[480..], w[1].input[..30]);
    }

    #[test]
    fn single_window() {
        let x = ps((0..510).map(|i| i as f64).collect(), 60);
        let w = windowize(&x, &x, DEFAULT_STRIDE).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].target.first(), Some(&15.0));
        assert_eq!(w[0].target.last(), Some(&494.0));
    }

    #[test]
    fn windowize_errors() {
        let short = ps(vec![1.0; 509], 60);
        assert!(windowize(&short, &short, 480).is_err());
        let a = ps(vec![1.0; 600], 60);
        let b = ps(vec![1.0; 601], 60);
        assert!(windowize(&a, &b, 480).is_err());
        let c = ps(vec![1.0; 600], 6);
        assert!(windowize(&a, &c, 480).is_err());
    }

    #[test]
    fn status_targets_follow_window_offsets() {
        let x = ps(vec![1.0; 990], 60);
        let st = StatusSeries::from_bools((0..990).map(|i| i % 2 == 1), s(60));
        let w = windowize(&x, &x, DEFAULT_STRIDE).unwrap();
        let c = with_status_targets(&w, &st).unwrap();
        assert_eq!(c[0].kind, WindowKind::Classification);
        // index 15 is odd -> ON
        assert_eq!(c[0].target[0], 1.0);
        assert_eq!(c[1].target[0], 1.0);
        assert_eq!(c[0].target[1], 0.0);
    }

    #[test]
    fn majority_status_resample() {
        let st = StatusSeries::new(vec![1, 0, 0, 0, 1, 1, 0, 1], s(6)).unwrap();
        let r = resample_status_majority(&st, s(24)).unwrap();
        assert_eq!(r.values(), &[0, 1]);
    }

    #[test]
    fn seconds_to_samples_ceils() {
        assert_eq!(s(60).seconds_to_samples(1.0), 1);
        assert_eq!(s(60).seconds_to_samples(0.0), 0);
        assert_eq!(s(6).seconds_to_samples(30.0), 5);
        assert_eq!(s(6).seconds_to_samples(31.0), 6);
    }
}
