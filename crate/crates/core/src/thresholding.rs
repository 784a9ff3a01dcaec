//! ON/OFF status from appliance power: Middle-Point, Variance-Sensitive and
//! Activation-Time thresholding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{PowerSeries, StatusSeries};

/// Two-cluster summary of a set of power readings, ordered by centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSummary<T> {
    pub m0: T,
    pub m1: T,
    pub sigma0: T,
    pub sigma1: T,
    pub n0: usize,
    pub n1: usize,
}

/// Population mean and standard deviation (two-pass).
fn mean_std<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(xs.len());
    let m = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n;
    (m, var.sqrt())
}

/// Exact optimal 2-means of 1-D data.
///
/// Optimal clusters are contiguous in sorted order, so every boundary
/// between distinct sorted values is scored in O(1) from prefix sums of the
/// mean-centered data. The first minimal split wins.
pub fn kmeans_1d_two<T: Scalar>(values: &[T]) -> Result<ClusterSummary<T>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("k-means input contains non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    if n < 2 || sorted[0] == sorted[n - 1] {
        return Err(Error::DegenerateClusters(
            "fewer than two distinct values; threshold undefined".into(),
        ));
    }
    let (center, _) = mean_std(&sorted);
    let total: T = sorted.iter().map(|&x| x - center).sum();
    let total_sq: T = sorted.iter().map(|&x| (x - center) * (x - center)).sum();

    let mut best: Option<(T, usize)> = None;
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    for i in 1..n {
        let d = sorted[i - 1] - center;
        s1 += d;
        s2 += d * d;
        if sorted[i - 1] == sorted[i] {
            continue;
        }
        let nl = T::from_usize_lossy(i);
        let nr = T::from_usize_lossy(n - i);
        let r1 = total - s1;
        let r2 = total_sq - s2;
        let sse = (s2 - s1 * s1 / nl) + (r2 - r1 * r1 / nr);
        if best.is_none_or(|(b, _)| sse < b) {
            best = Some((sse, i));
        }
    }
    let (_, split) = best.expect("at least one boundary between distinct values");
    let (m0, sigma0) = mean_std(&sorted[..split]);
    let (m1, sigma1) = mean_std(&sorted[split..]);
    Ok(ClusterSummary {
        m0,
        m1,
        sigma0,
        sigma1,
        n0: split,
        n1: n - split,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThresholdMethod {
    /// Middle point between the cluster centroids.
    #[serde(rename = "MP")]
    MiddlePoint,
    /// Centroid interpolation weighted by cluster spread.
    #[serde(rename = "VS")]
    VarianceSensitive,
    /// Fixed power threshold plus minimum OFF/ON durations.
    #[serde(rename = "AT")]
    ActivationTime,
}

impl ThresholdMethod {
    pub const ALL: [ThresholdMethod; 3] = [
        Self::MiddlePoint,
        Self::VarianceSensitive,
        Self::ActivationTime,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Self::MiddlePoint => "MP",
            Self::VarianceSensitive => "VS",
            Self::ActivationTime => "AT",
        }
    }
}

impl fmt::Display for ThresholdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ThresholdMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MP" => Ok(Self::MiddlePoint),
            "VS" => Ok(Self::VarianceSensitive),
            "AT" => Ok(Self::ActivationTime),
            other => Err(Error::config(format!("unknown threshold method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec<T> {
    pub method: ThresholdMethod,
    pub lambda_watts: T,
    /// Minimum OFF duration; shorter OFF gaps inherit the previous ON state.
    pub mu_off_seconds: T,
    /// Minimum ON duration; shorter ON runs are dropped.
    pub mu_on_seconds: T,
}

impl<T: Scalar> ThresholdSpec<T> {
    pub fn power_only(method: ThresholdMethod, lambda_watts: T) -> Self {
        Self {
            method,
            lambda_watts,
            mu_off_seconds: T::zero(),
            mu_on_seconds: T::zero(),
        }
    }

    pub fn activation_time(lambda_watts: T, mu_off_seconds: T, mu_on_seconds: T) -> Result<Self> {
        if [lambda_watts, mu_off_seconds, mu_on_seconds]
            .iter()
            .any(|v| !v.is_finite() || *v < T::zero())
        {
            return Err(Error::config(
                "AT thresholds must be finite and nonnegative",
            ));
        }
        Ok(Self {
            method: ThresholdMethod::ActivationTime,
            lambda_watts,
            mu_off_seconds,
            mu_on_seconds,
        })
    }
}

/// Activation-time parameters for the appliances with published defaults.
pub fn at_defaults<T: Scalar>(appliance: &str) -> Option<ThresholdSpec<T>> {
    let key = appliance
        .trim()
        .to_ascii_lowercase()
        .replace([' ', '-'], "_");
    let (l, m0, m1) = match key.as_str() {
        "dishwasher" | "dish_washer" => (10.0, 30.0, 30.0),
        "fridge" | "fridge_freezer" => (50.0, 1.0, 1.0),
        "washing_machine" | "washingmachine" | "washer_dryer" => (20.0, 3.0, 30.0),
        _ => return None,
    };
    Some(ThresholdSpec {
        method: ThresholdMethod::ActivationTime,
        lambda_watts: T::lit(l),
        mu_off_seconds: T::lit(m0),
        mu_on_seconds: T::lit(m1),
    })
}

pub fn threshold_mp<T: Scalar>(summary: &ClusterSummary<T>) -> ThresholdSpec<T> {
    ThresholdSpec::power_only(
        ThresholdMethod::MiddlePoint,
        (summary.m0 + summary.m1) / T::lit(2.0),
    )
}

/// Falls back to the middle point when both clusters have zero spread.
pub fn threshold_vs<T: Scalar>(summary: &ClusterSummary<T>) -> ThresholdSpec<T> {
    let spread = summary.sigma0 + summary.sigma1;
    if spread <= T::zero() {
        return ThresholdSpec {
            method: ThresholdMethod::VarianceSensitive,
            ..threshold_mp(summary)
        };
    }
    let d = summary.sigma0 / spread;
    ThresholdSpec::power_only(
        ThresholdMethod::VarianceSensitive,
        (T::one() - d) * summary.m0 + d * summary.m1,
    )
}

/// `status[i] = 1` iff `power[i] >= lambda`.
pub fn apply_power_threshold<T: Scalar>(power: &PowerSeries<T>, lambda_watts: T) -> StatusSeries {
    StatusSeries::from_bools(
        power.values().iter().map(|&p| p >= lambda_watts),
        power.sampling(),
    )
}

/// Maximal constant runs as `(value, start, len)`.
pub(crate) fn runs(values: &[u8]) -> Vec<(u8, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let s = i;
        while i < values.len() && values[i] == values[s] {
            i += 1;
        }
        out.push((values[s], s, i - s));
    }
    out
}

/// Minimum-duration filtering, expressed in samples.
///
/// First every OFF run shorter than `min_off` that follows an ON run is
/// relabeled ON, then every ON run shorter than `min_on` is relabeled OFF.
pub fn duration_filter_samples(values: &[u8], min_off: usize, min_on: usize) -> Vec<u8> {
    let mut out = values.to_vec();
    for (v, s, len) in runs(values) {
        if v == 0 && s > 0 && len < min_off {
            out[s..s + len].fill(1);
        }
    }
    for (v, s, len) in runs(&out.clone()) {
        if v == 1 && len < min_on {
            out[s..s + len].fill(0);
        }
    }
    out
}

/// Minimum-duration filtering with durations in seconds, converted to
/// samples by ceiling division with the series period.
pub fn duration_filter(
    status: &StatusSeries,
    mu_off_seconds: f64,
    mu_on_seconds: f64,
) -> StatusSeries {
    let sampling = status.sampling();
    let min_off = sampling.seconds_to_samples(mu_off_seconds);
    let min_on = sampling.seconds_to_samples(mu_on_seconds);
    StatusSeries::new(
        duration_filter_samples(status.values(), min_off, min_on),
        sampling,
    )
    .expect("filter preserves binary values")
}

pub fn threshold_at<T: Scalar>(power: &PowerSeries<T>, spec: &ThresholdSpec<T>) -> StatusSeries {
    let raw = apply_power_threshold(power, spec.lambda_watts);
    duration_filter(
        &raw,
        spec.mu_off_seconds.as_f64(),
        spec.mu_on_seconds.as_f64(),
    )
}

/// Status under any resolved spec.
pub fn apply_threshold<T: Scalar>(power: &PowerSeries<T>, spec: &ThresholdSpec<T>) -> StatusSeries {
    match spec.method {
        ThresholdMethod::ActivationTime => threshold_at(power, spec),
        _ => apply_power_threshold(power, spec.lambda_watts),
    }
}

/// Resolves a threshold from training power alone (MP/VS) or from the
/// supplied activation-time parameters, falling back to the per-appliance
/// defaults keyed by the series label.
pub fn derive_threshold<T: Scalar>(
    train_power: &PowerSeries<T>,
    method: ThresholdMethod,
    at_params: Option<&ThresholdSpec<T>>,
) -> Result<ThresholdSpec<T>> {
    match method {
        ThresholdMethod::MiddlePoint => Ok(threshold_mp(&kmeans_1d_two(train_power.values())?)),
        ThresholdMethod::VarianceSensitive => {
            Ok(threshold_vs(&kmeans_1d_two(train_power.values())?))
        }
        ThresholdMethod::ActivationTime => match at_params {
            Some(spec) => Ok(ThresholdSpec {
                method: ThresholdMethod::ActivationTime,
                ..*spec
            }),
            None => at_defaults(train_power.label()).ok_or_else(|| {
                Error::config(format!(
                    "no activation-time parameters configured for '{}'",
                    train_power.label()
                ))
            }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SamplingSpec;

    fn sp(p: u32) -> SamplingSpec {
        SamplingSpec::new(p).unwrap()
    }

    fn summary(m0: f64, m1: f64, s0: f64, s1: f64) -> ClusterSummary<f64> {
        ClusterSummary {
            m0,
            m1,
            sigma0: s0,
            sigma1: s1,
            n0: 1,
            n1: 1,
        }
    }

    #[test]
    fn two_point_masses() {
        let c = kmeans_1d_two(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0]).unwrap();
        assert_eq!(
            (c.m0, c.m1, c.sigma0, c.sigma1, c.n0, c.n1),
            (0.0, 10.0, 0.0, 0.0, 3, 3)
        );
    }

    #[test]
    fn split_between_one_and_nine() {
        let c = kmeans_1d_two(&[10.0, 0.0, 11.0, 1.0, 9.0, 0.0]).unwrap();
        assert!((c.m0 - 1.0f64 / 3.0).abs() < 1e-15);
        assert_eq!(c.m1, 10.0);
        assert_eq!((c.n0, c.n1), (3, 3));
    }

    #[test]
    fn kmeans_degenerate() {
        assert!(matches!(
            kmeans_1d_two(&[3.0, 3.0, 3.0]),
            Err(Error::DegenerateClusters(_))
        ));
        assert!(matches!(
            kmeans_1d_two(&[3.0f64]),
            Err(Error::DegenerateClusters(_))
        ));
    }

    #[test]
    fn kmeans_generic_f32() {
        let c = kmeans_1d_two(&[0.0f32, 0.0, 10.0, 10.0]).unwrap();
        assert_eq!(threshold_mp(&c).lambda_watts, 5.0f32);
    }

    #[test]
    fn mp_cases() {
        assert_eq!(
            threshold_mp(&summary(1.0, 1866.0, 0.0, 0.0)).lambda_watts,
            933.5
        );
        assert_eq!(
            threshold_mp(&summary(0.0, 10.0, 0.0, 0.0)).lambda_watts,
            5.0
        );
        assert_eq!(threshold_mp(&summary(2.0, 4.0, 0.0, 0.0)).lambda_watts, 3.0);
    }

    #[test]
    fn vs_cases() {
        let s = summary(0.0, 100.0, 1.0, 3.0);
        assert_eq!(threshold_vs(&s).lambda_watts, 25.0);
        assert_eq!(
            threshold_vs(&summary(0.0, 100.0, 0.0, 3.0)).lambda_watts,
            0.0
        );
        let eq = summary(1.0, 1866.0, 7.0, 7.0);
        assert_eq!(
            threshold_vs(&eq).lambda_watts,
            threshold_mp(&eq).lambda_watts
        );
        let zero = threshold_vs(&summary(0.0, 10.0, 0.0, 0.0));
        assert_eq!(zero.lambda_watts, 5.0);
        assert_eq!(zero.method, ThresholdMethod::VarianceSensitive);
    }

    #[test]
    fn power_threshold_ties_on() {
        let p = PowerSeries::new(vec![0.0, 5.0, 10.0], sp(60), "x").unwrap();
        assert_eq!(apply_power_threshold(&p, 5.0).values(), &[0, 1, 1]);
        assert_eq!(apply_power_threshold(&p, 0.0).values(), &[1, 1, 1]);
        let p = PowerSeries::new(vec![10.0, 10.0, 0.0, 10.0], sp(60), "x").unwrap();
        assert_eq!(apply_power_threshold(&p, 5.0).values(), &[1, 1, 0, 1]);
    }

    #[test]
    fn duration_filter_cases() {
        let s = StatusSeries::new(vec![1, 1, 0, 1, 1], sp(1)).unwrap();
        assert_eq!(duration_filter(&s, 2.0, 0.0).values(), &[1, 1, 1, 1, 1]);
        assert_eq!(duration_filter(&s, 0.0, 0.0), s);
        let s = StatusSeries::new(vec![0, 1, 0, 0, 1, 1], sp(1)).unwrap();
        assert_eq!(duration_filter(&s, 0.0, 2.0).values(), &[0, 0, 0, 0, 1, 1]);
        // leading OFF run has no previous state
        let s = StatusSeries::new(vec![0, 1, 1, 1], sp(1)).unwrap();
        assert_eq!(duration_filter(&s, 5.0, 0.0).values(), &[0, 1, 1, 1]);
    }

    #[test]
    fn duration_seconds_ceil_to_samples() {
        // 61 s at a 60 s period is two samples
        let s = StatusSeries::new(vec![1, 0, 1, 0, 0, 1], sp(60)).unwrap();
        assert_eq!(duration_filter(&s, 61.0, 0.0).values(), &[1, 1, 1, 0, 0, 1]);
        // Table-1 fridge durations are a no-op at one-minute resolution
        assert_eq!(duration_filter(&s, 1.0, 1.0), s);
    }

    #[test]
    fn at_defaults_table() {
        let d = at_defaults::<f64>("Dishwasher").unwrap();
        assert_eq!(
            (d.lambda_watts, d.mu_off_seconds, d.mu_on_seconds),
            (10.0, 30.0, 30.0)
        );
        let f = at_defaults::<f64>("fridge").unwrap();
        assert_eq!(
            (f.lambda_watts, f.mu_off_seconds, f.mu_on_seconds),
            (50.0, 1.0, 1.0)
        );
        let w = at_defaults::<f64>("washing machine").unwrap();
        assert_eq!(
            (w.lambda_watts, w.mu_off_seconds, w.mu_on_seconds),
            (20.0, 3.0, 30.0)
        );
        assert!(at_defaults::<f64>("kettle").is_none());
    }

    #[test]
    fn at_all_off_for_zero_power() {
        let p = PowerSeries::new(vec![0.0; 50], sp(6), "fridge").unwrap();
        let spec = at_defaults::<f64>("fridge").unwrap();
        assert_eq!(threshold_at(&p, &spec).count_on(), 0);
    }

    #[test]
    fn derive_cases() {
        let p =
            PowerSeries::new(vec![0.0, 0.0, 0.0, 10.0, 10.0, 10.0], sp(60), "dishwasher").unwrap();
        assert_eq!(
            derive_threshold(&p, ThresholdMethod::MiddlePoint, None)
                .unwrap()
                .lambda_watts,
            5.0
        );
        assert_eq!(
            derive_threshold(&p, ThresholdMethod::VarianceSensitive, None)
                .unwrap()
                .lambda_watts,
            5.0
        );
        let at = derive_threshold(&p, ThresholdMethod::ActivationTime, None).unwrap();
        assert_eq!(at.lambda_watts, 10.0);
        let flat = PowerSeries::new(vec![4.0; 6], sp(60), "kettle").unwrap();
        assert!(matches!(
            derive_threshold(&flat, ThresholdMethod::MiddlePoint, None),
            Err(Error::DegenerateClusters(_))
        ));
        assert!(matches!(
            derive_threshold(&flat, ThresholdMethod::ActivationTime, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn method_parse() {
        assert_eq!(
            "vs".parse::<ThresholdMethod>().unwrap(),
            ThresholdMethod::VarianceSensitive
        );
        assert!("XX".parse::<ThresholdMethod>().is_err());
        assert_eq!(ThresholdMethod::ActivationTime.to_string(), "AT");
    }
}
