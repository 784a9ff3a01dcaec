//! Synthetic households: appliance templates with known ground-truth status,
//! summed with a nonnegative residual into an aggregate meter signal.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;
use crate::series::{PowerSeries, SamplingSpec, StatusSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Rectangular pulses repeating with a fixed onset period.
    PeriodicRect,
    /// High plateau, low plateau, high plateau.
    TwoPeakCycle,
    /// High spike followed by an oscillating mid-power segment.
    BurstCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplianceProfile {
    pub kind: ProfileKind,
    pub on_watts: f64,
    /// Onset-to-onset period for `PeriodicRect`; mean OFF gap between events otherwise.
    pub period_seconds: f64,
    pub on_duration_seconds: f64,
    /// Relative jitter applied to the period or gap.
    pub jitter: f64,
    pub noise_sd: f64,
}

impl ApplianceProfile {
    pub fn fridge() -> Self {
        Self {
            kind: ProfileKind::PeriodicRect,
            on_watts: 100.0,
            period_seconds: 3000.0,
            on_duration_seconds: 1200.0,
            jitter: 0.15,
            noise_sd: 3.0,
        }
    }

    pub fn dishwasher() -> Self {
        Self {
            kind: ProfileKind::TwoPeakCycle,
            on_watts: 2200.0,
            period_seconds: 20.0 * 3600.0,
            on_duration_seconds: 100.0 * 60.0,
            jitter: 0.3,
            noise_sd: 10.0,
        }
    }

    pub fn washing_machine() -> Self {
        Self {
            kind: ProfileKind::BurstCycle,
            on_watts: 1900.0,
            period_seconds: 26.0 * 3600.0,
            on_duration_seconds: 90.0 * 60.0,
            jitter: 0.3,
            noise_sd: 10.0,
        }
    }

    /// Preset by appliance name.
    pub fn preset(name: &str) -> Option<Self> {
        match name
            .trim()
            .to_ascii_lowercase()
            .replace([' ', '-'], "_")
            .as_str()
        {
            "fridge" => Some(Self::fridge()),
            "dishwasher" => Some(Self::dishwasher()),
            "washing_machine" => Some(Self::washing_machine()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.on_watts > 0.0
            && self.period_seconds > 0.0
            && self.on_duration_seconds > 0.0
            && (0.0..1.0).contains(&self.jitter)
            && self.noise_sd >= 0.0
            && [
                self.on_watts,
                self.period_seconds,
                self.on_duration_seconds,
                self.noise_sd,
            ]
            .iter()
            .all(|v| v.is_finite());
        if !ok {
            return Err(Error::config(format!("invalid appliance profile {self:?}")));
        }
        if self.kind == ProfileKind::PeriodicRect
            && self.period_seconds * (1.0 - self.jitter) <= self.on_duration_seconds
        {
            return Err(Error::config(
                "periodic profile needs period * (1 - jitter) > on duration",
            ));
        }
        Ok(())
    }

    /// Noise-free power of the event template at offset `i` of `len` samples.
    fn template(&self, i: usize, len: usize, period_s: f64) -> f64 {
        let frac = i as f64 / len as f64;
        match self.kind {
            ProfileKind::PeriodicRect => self.on_watts,
            ProfileKind::TwoPeakCycle => {
                if !(0.25..0.75).contains(&frac) {
                    self.on_watts
                } else {
                    0.04 * self.on_watts
                }
            }
            ProfileKind::BurstCycle => {
                if frac < 0.2 {
                    self.on_watts
                } else {
                    let t = i as f64 * period_s;
                    self.on_watts * (0.2 + 0.1 * (2.0 * std::f64::consts::PI * t / 300.0).sin())
                }
            }
        }
    }
}

/// Event onsets (in samples) that fit completely inside `length`.
fn schedule(
    profile: &ApplianceProfile,
    on_len: usize,
    length: usize,
    period_s: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let spacing = profile.period_seconds / period_s;
    let jittered =
        |rng: &mut ChaCha8Rng| spacing * (1.0 + profile.jitter * rng.random_range(-1.0..=1.0));
    let mut onsets = Vec::new();
    let mut t = rng.random::<f64>() * spacing;
    loop {
        let onset = t.round() as usize;
        if onset + on_len > length {
            break;
        }
        if let Some(&prev) = onsets.last() {
            // keep at least one OFF sample between events
            if onset <= prev + on_len {
                t = (prev + on_len + 1) as f64;
                continue;
            }
        }
        onsets.push(onset);
        t = match profile.kind {
            ProfileKind::PeriodicRect => t + jittered(rng),
            _ => (onset + on_len) as f64 + jittered(rng),
        };
    }
    onsets
}

/// Appliance power and its ground-truth status.
pub fn generate_appliance<T: Scalar>(
    profile: &ApplianceProfile,
    label: &str,
    length: usize,
    sampling: SamplingSpec,
    seed: u64,
) -> Result<(PowerSeries<T>, StatusSeries)> {
    profile.validate()?;
    if length == 0 {
        return Err(Error::config("synthetic length must be positive"));
    }
    let period_s = sampling.period_seconds() as f64;
    let on_len = ((profile.on_duration_seconds / period_s).round() as usize).max(1);
    let mut rng = rng_from_seed(seed);
    let mut power = vec![0.0f64; length];
    let mut status = vec![0u8; length];
    for onset in schedule(profile, on_len, length, period_s, &mut rng) {
        for i in 0..on_len {
            power[onset + i] = profile.template(i, on_len, period_s);
            status[onset + i] = 1;
        }
    }
    if profile.noise_sd > 0.0 {
        let noise = Normal::new(0.0, profile.noise_sd).map_err(|e| Error::config(e.to_string()))?;
        for p in power.iter_mut() {
            *p = (*p + noise.sample(&mut rng)).max(0.0);
        }
    }
    Ok((
        PowerSeries::new(power.into_iter().map(T::lit).collect(), sampling, label)?,
        StatusSeries::new(status, sampling)?,
    ))
}

#[derive(Debug, Clone)]
pub struct Household<T> {
    pub aggregate: PowerSeries<T>,
    pub appliances: Vec<PowerSeries<T>>,
    pub truths: Vec<StatusSeries>,
    /// Unidentified residual load.
    pub residual: Vec<T>,
}

/// Sums appliance series and a truncated-Gaussian residual.
///
/// Appliance `i` uses seed stream `i + 1`; the residual uses stream 0.
pub fn generate_household<T: Scalar>(
    profiles: &[(String, ApplianceProfile)],
    residual_sd: f64,
    length: usize,
    sampling: SamplingSpec,
    seed: u64,
) -> Result<Household<T>> {
    if !(residual_sd >= 0.0 && residual_sd.is_finite()) {
        return Err(Error::config("residual sd must be finite and nonnegative"));
    }
    let mut appliances = Vec::with_capacity(profiles.len());
    let mut truths = Vec::with_capacity(profiles.len());
    for (i, (name, profile)) in profiles.iter().enumerate() {
        let (p, s) = generate_appliance::<T>(
            profile,
            name,
            length,
            sampling,
            derive_seed(seed, i as u64 + 1),
        )?;
        appliances.push(p);
        truths.push(s);
    }
    let mut residual = vec![T::zero(); length];
    if residual_sd > 0.0 {
        let mut rng = rng_from_seed(derive_seed(seed, 0));
        let noise = Normal::new(0.0, residual_sd).map_err(|e| Error::config(e.to_string()))?;
        for r in residual.iter_mut() {
            *r = T::lit(noise.sample(&mut rng).max(0.0));
        }
    }
    let mut total = residual.clone();
    for a in &appliances {
        for (t, &v) in total.iter_mut().zip(a.values()) {
            *t += v;
        }
    }
    Ok(Household {
        aggregate: PowerSeries::new(total, sampling, "aggregate")?,
        appliances,
        truths,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thresholding::runs;

    fn sp() -> SamplingSpec {
        SamplingSpec::new(60).unwrap()
    }

    #[test]
    fn noiseless_fridge_is_two_valued() {
        let prof = ApplianceProfile {
            noise_sd: 0.0,
            ..ApplianceProfile::fridge()
        };
        let (p, s) = generate_appliance::<f64>(&prof, "fridge", 2000, sp(), 3).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0 || v == 100.0));
        assert!(p
            .values()
            .iter()
            .zip(s.values())
            .all(|(&v, &st)| (v > 0.0) == (st == 1)));
        assert!(s.count_on() > 0);
    }

    #[test]
    fn deterministic_under_seed() {
        let a =
            generate_appliance::<f64>(&ApplianceProfile::dishwasher(), "d", 5000, sp(), 9).unwrap();
        let b =
            generate_appliance::<f64>(&ApplianceProfile::dishwasher(), "d", 5000, sp(), 9).unwrap();
        assert_eq!(a, b);
        let c = generate_appliance::<f64>(&ApplianceProfile::dishwasher(), "d", 5000, sp(), 10)
            .unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn zero_jitter_onsets_every_ten_samples() {
        let prof = ApplianceProfile {
            kind: ProfileKind::PeriodicRect,
            on_watts: 100.0,
            period_seconds: 600.0,
            on_duration_seconds: 180.0,
            jitter: 0.0,
            noise_sd: 0.0,
        };
        let (_, s) = generate_appliance::<f64>(&prof, "f", 500, sp(), 1).unwrap();
        let onsets: Vec<usize> = runs(s.values())
            .into_iter()
            .filter(|r| r.0 == 1)
            .map(|r| r.1)
            .collect();
        assert!(onsets.len() >= 45);
        assert!(onsets.windows(2).all(|w| w[1] - w[0] == 10));
    }

    #[test]
    fn truth_runs_respect_on_duration() {
        for prof in [
            ApplianceProfile::fridge(),
            ApplianceProfile::dishwasher(),
            ApplianceProfile::washing_machine(),
        ] {
            let (_, s) = generate_appliance::<f64>(&prof, "x", 20160, sp(), 5).unwrap();
            let min_len = (prof.on_duration_seconds / 60.0).round() as usize;
            assert!(runs(s.values())
                .iter()
                .filter(|r| r.0 == 1)
                .all(|r| r.2 >= min_len));
            assert!(s.count_on() > 0);
        }
    }

    #[test]
    fn two_peak_template_shape() {
        let prof = ApplianceProfile {
            noise_sd: 0.0,
            ..ApplianceProfile::dishwasher()
        };
        let (p, _) = generate_appliance::<f64>(&prof, "d", 20160, sp(), 2).unwrap();
        let distinct: std::collections::BTreeSet<u64> =
            p.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn household_single_appliance_no_residual() {
        let profs = vec![("fridge".to_string(), ApplianceProfile::fridge())];
        let h = generate_household::<f64>(&profs, 0.0, 1000, sp(), 4).unwrap();
        assert_eq!(h.aggregate.values(), h.appliances[0].values());
    }

    #[test]
    fn household_residual_only() {
        let h = generate_household::<f64>(&[], 20.0, 1000, sp(), 4).unwrap();
        assert_eq!(h.aggregate.values(), h.residual.as_slice());
        assert!(h.residual.iter().all(|&r| r >= 0.0));
        assert!(h.residual.iter().any(|&r| r > 0.0));
    }

    #[test]
    fn household_sum_is_exact() {
        let profs = vec![
            ("fridge".to_string(), ApplianceProfile::fridge()),
            ("dishwasher".to_string(), ApplianceProfile::dishwasher()),
        ];
        let h = generate_household::<f64>(&profs, 15.0, 3000, sp(), 8).unwrap();
        for j in 0..3000 {
            let mut s = h.residual[j];
            for a in &h.appliances {
                s += a.values()[j];
            }
            assert_eq!(s, h.aggregate.values()[j]);
        }
    }

    #[test]
    fn invalid_profiles() {
        let mut p = ApplianceProfile::fridge();
        p.jitter = 1.0;
        assert!(p.validate().is_err());
        let mut p = ApplianceProfile::fridge();
        p.on_duration_seconds = 4000.0;
        assert!(p.validate().is_err());
        assert!(ApplianceProfile::preset("kettle").is_none());
        assert!(ApplianceProfile::preset("Washing Machine").is_some());
    }
}
