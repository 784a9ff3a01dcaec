//! Run configuration: a flat `key = value` file plus `--set` overrides.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value          # trailing comments are allowed
//! list.key = a, b, c
//! ```
//!
//! Keys are dotted lowercase names; later entries win. Per-appliance keys
//! use the appliance name as the middle segment, e.g.
//! `threshold.fridge.lambda_watts = 50`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nilm_core::ingestion::{SplitFractions, DEFAULT_FILL_LIMIT, DEFAULT_REFERENCE_WATTS};
use nilm_core::model::{DEFAULT_LEARNING_RATE, DEFAULT_LOSS_K};
use nilm_core::reconstruction::LevelMode;
use nilm_core::series::{SamplingSpec, DEFAULT_OVERLAP, INPUT_LEN, OUTPUT_LEN};
use nilm_core::synth::{ApplianceProfile, ProfileKind};
use nilm_core::thresholding::{at_defaults, ThresholdMethod, ThresholdSpec};
use nilm_core::{Error, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Chronological,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtParams {
    pub lambda_watts: f64,
    pub mu_off_seconds: f64,
    pub mu_on_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory; not part of the config hash.
    pub out: PathBuf,
    /// Worker threads for independent trainings; not part of the config hash.
    pub workers: usize,

    /// Meter CSV files, one per building. Empty means `<out>/household.csv`.
    pub data_paths: Vec<PathBuf>,
    pub aggregate_column: String,
    pub appliances: Vec<String>,
    pub source_period: u32,
    pub target_period: u32,
    pub fill_limit: usize,

    pub input_len: usize,
    pub output_len: usize,
    pub overlap: usize,
    pub reference_watts: f64,

    pub split_mode: SplitMode,
    pub split: SplitFractions,
    /// Seed for random splits; derived from `seed` when unset.
    pub split_seed: Option<u64>,
    /// Building that supplies validation and test windows.
    pub split_building: usize,

    /// Method used by `sweep`.
    pub method: ThresholdMethod,
    /// Methods trained and evaluated.
    pub methods: Vec<ThresholdMethod>,
    pub at: BTreeMap<String, AtParams>,
    pub level_mode: LevelMode,

    pub width_scale: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Loss weights trained by `train`.
    pub loss_w: Vec<f64>,
    pub loss_k: f64,

    pub sweep_w: Vec<f64>,
    pub sweep_repetitions: usize,

    pub synth_days: f64,
    pub synth_residual_sd: f64,
    pub profiles: BTreeMap<String, ApplianceProfile>,
}

const APPLIANCES: [&str; 3] = ["fridge", "dishwasher", "washing_machine"];

impl Default for RunConfig {
    fn default() -> Self {
        let appliances: Vec<String> = APPLIANCES.iter().map(|s| s.to_string()).collect();
        let mut cfg = Self {
            seed: 42,
            out: PathBuf::from("out"),
            workers: 1,
            data_paths: Vec::new(),
            aggregate_column: "aggregate".into(),
            appliances: Vec::new(),
            source_period: 6,
            target_period: 60,
            fill_limit: DEFAULT_FILL_LIMIT,
            input_len: INPUT_LEN,
            output_len: OUTPUT_LEN,
            overlap: DEFAULT_OVERLAP,
            reference_watts: DEFAULT_REFERENCE_WATTS,
            split_mode: SplitMode::Chronological,
            split: SplitFractions {
                train: 0.8,
                validation: 0.1,
                test: 0.1,
            },
            split_seed: None,
            split_building: 0,
            method: ThresholdMethod::MiddlePoint,
            methods: ThresholdMethod::ALL.to_vec(),
            at: BTreeMap::new(),
            level_mode: LevelMode::Conditional,
            width_scale: 1.0,
            epochs: 300,
            batch_size: 32,
            learning_rate: DEFAULT_LEARNING_RATE,
            loss_w: vec![0.0, 1.0],
            loss_k: DEFAULT_LOSS_K,
            sweep_w: (0..=10).map(|i| i as f64 / 10.0).collect(),
            sweep_repetitions: 5,
            synth_days: 14.0,
            synth_residual_sd: 30.0,
            profiles: BTreeMap::new(),
        };
        cfg.set_appliances(appliances);
        cfg
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn profile_kind(key: &str, value: &str) -> Result<ProfileKind> {
    match value.trim() {
        "PeriodicRect" => Ok(ProfileKind::PeriodicRect),
        "TwoPeakCycle" => Ok(ProfileKind::TwoPeakCycle),
        "BurstCycle" => Ok(ProfileKind::BurstCycle),
        _ => Err(Error::config(format!(
            "invalid value '{value}' for '{key}'"
        ))),
    }
}

fn kind_name(k: ProfileKind) -> &'static str {
    match k {
        ProfileKind::PeriodicRect => "PeriodicRect",
        ProfileKind::TwoPeakCycle => "TwoPeakCycle",
        ProfileKind::BurstCycle => "BurstCycle",
    }
}

/// Splits `key = value  # comment` lines into ordered pairs.
pub fn parse_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("config line {}: expected 'key = value'", i + 1))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config(format!("config line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Replaces the appliance list, seeding per-appliance defaults for new names.
    fn set_appliances(&mut self, names: Vec<String>) {
        for name in &names {
            if !self.at.contains_key(name) {
                if let Some(spec) = at_defaults::<f64>(name) {
                    self.at.insert(
                        name.clone(),
                        AtParams {
                            lambda_watts: spec.lambda_watts,
                            mu_off_seconds: spec.mu_off_seconds,
                            mu_on_seconds: spec.mu_on_seconds,
                        },
                    );
                }
            }
            if !self.profiles.contains_key(name) {
                if let Some(p) = ApplianceProfile::preset(name) {
                    self.profiles.insert(name.clone(), p);
                }
            }
        }
        self.at.retain(|k, _| names.contains(k));
        self.profiles.retain(|k, _| names.contains(k));
        self.appliances = names;
    }

    /// Builds a config from ordered entries: defaults, then entries in order.
    /// The appliance list is applied first so per-appliance keys can refer to it.
    pub fn from_entries(entries: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some((_, v)) = entries.iter().rev().find(|(k, _)| k == "data.appliances") {
            let names: Vec<String> = parse_list("data.appliances", v)?;
            if names.is_empty() {
                return Err(Error::config("data.appliances is empty"));
            }
            cfg.set_appliances(names);
        }
        for (k, v) in entries {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut entries = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::config(format!("cannot read config {}: {e}", p.display()))
                })?;
                parse_text(&text)?
            }
            None => Vec::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(format!("--set expects key=value, got '{o}'")))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_entries(&entries)
    }

    fn app_key<'a>(&self, key: &'a str, prefix: &str) -> Option<(String, &'a str)> {
        let rest = key.strip_prefix(prefix)?.strip_prefix('.')?;
        let (app, field) = rest.rsplit_once('.')?;
        self.appliances
            .iter()
            .any(|a| a == app)
            .then(|| (app.to_string(), field))
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "workers" => self.workers = parse(key, v)?,
            "data.paths" => {
                self.data_paths = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "data.aggregate" => self.aggregate_column = v.to_string(),
            "data.appliances" => {
                let names: Vec<String> = parse_list(key, v)?;
                if names != self.appliances {
                    self.set_appliances(names);
                }
            }
            "data.source_period" => self.source_period = parse(key, v)?,
            "data.target_period" => self.target_period = parse(key, v)?,
            "data.fill_limit" => self.fill_limit = parse(key, v)?,
            "window.input_len" => self.input_len = parse(key, v)?,
            "window.output_len" => self.output_len = parse(key, v)?,
            "window.overlap" => self.overlap = parse(key, v)?,
            "normalization.reference_watts" => self.reference_watts = parse(key, v)?,
            "split.mode" => {
                self.split_mode = match v {
                    "chronological" => SplitMode::Chronological,
                    "random" => SplitMode::Random,
                    _ => return Err(Error::config(format!("invalid value '{v}' for '{key}'"))),
                }
            }
            "split.train" => self.split.train = parse(key, v)?,
            "split.validation" => self.split.validation = parse(key, v)?,
            "split.test" => self.split.test = parse(key, v)?,
            "split.seed" => {
                self.split_seed = if v.is_empty() {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "split.building" => self.split_building = parse(key, v)?,
            "threshold.method" => self.method = v.parse()?,
            "threshold.methods" => {
                self.methods = parse_list(key, v)?;
                self.methods.sort();
                self.methods.dedup();
            }
            "reconstruction.levels" => {
                self.level_mode = match v {
                    "conditional" => LevelMode::Conditional,
                    "literal" => LevelMode::Literal,
                    _ => return Err(Error::config(format!("invalid value '{v}' for '{key}'"))),
                }
            }
            "model.width_scale" => self.width_scale = parse(key, v)?,
            "model.epochs" => self.epochs = parse(key, v)?,
            "model.batch_size" => self.batch_size = parse(key, v)?,
            "model.learning_rate" => self.learning_rate = parse(key, v)?,
            "loss.w" => self.loss_w = parse_list(key, v)?,
            "loss.k" => self.loss_k = parse(key, v)?,
            "sweep.w" => self.sweep_w = parse_list(key, v)?,
            "sweep.repetitions" => self.sweep_repetitions = parse(key, v)?,
            "synth.days" => self.synth_days = parse(key, v)?,
            "synth.residual_sd" => self.synth_residual_sd = parse(key, v)?,
            _ => return self.set_appliance_key(key, v),
        }
        Ok(())
    }

    fn set_appliance_key(&mut self, key: &str, v: &str) -> Result<()> {
        if let Some((app, field)) = self.app_key(key, "threshold") {
            let at = self.at.entry(app).or_insert(AtParams {
                lambda_watts: f64::NAN,
                mu_off_seconds: f64::NAN,
                mu_on_seconds: f64::NAN,
            });
            match field {
                "lambda_watts" => at.lambda_watts = parse(key, v)?,
                "mu_off_seconds" => at.mu_off_seconds = parse(key, v)?,
                "mu_on_seconds" => at.mu_on_seconds = parse(key, v)?,
                _ => return Err(Error::config(format!("unknown config key '{key}'"))),
            }
            return Ok(());
        }
        if let Some((app, field)) = self.app_key(key, "synth") {
            let p = self.profiles.entry(app).or_insert(ApplianceProfile {
                kind: ProfileKind::PeriodicRect,
                on_watts: f64::NAN,
                period_seconds: f64::NAN,
                on_duration_seconds: f64::NAN,
                jitter: 0.0,
                noise_sd: 0.0,
            });
            match field {
                "kind" => p.kind = profile_kind(key, v)?,
                "on_watts" => p.on_watts = parse(key, v)?,
                "period_seconds" => p.period_seconds = parse(key, v)?,
                "on_duration_seconds" => p.on_duration_seconds = parse(key, v)?,
                "jitter" => p.jitter = parse(key, v)?,
                "noise_sd" => p.noise_sd = parse(key, v)?,
                _ => return Err(Error::config(format!("unknown config key '{key}'"))),
            }
            return Ok(());
        }
        Err(Error::config(format!("unknown config key '{key}'")))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("workers", self.workers),
            ("data.source_period", self.source_period as usize),
            ("data.target_period", self.target_period as usize),
            ("model.batch_size", self.batch_size),
            ("sweep.repetitions", self.sweep_repetitions),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{k} must be positive")));
            }
        }
        if self.appliances.is_empty() {
            return Err(Error::config("data.appliances is empty"));
        }
        self.source_sampling()?.factor_to(self.target_sampling()?)?;
        if self.input_len != INPUT_LEN || self.output_len != OUTPUT_LEN {
            return Err(Error::config(format!(
                "the network is built for {INPUT_LEN}-sample inputs and {OUTPUT_LEN}-sample outputs"
            )));
        }
        if self.overlap >= INPUT_LEN {
            return Err(Error::config(
                "window.overlap must be smaller than the input window",
            ));
        }
        nilm_core::ingestion::NormalizationSpec::new(self.reference_watts)?;
        self.split.validate()?;
        if self.methods.is_empty() {
            return Err(Error::config("threshold.methods is empty"));
        }
        if !(self.width_scale > 0.0 && self.width_scale <= 1.0) {
            return Err(Error::config("model.width_scale must be in (0, 1]"));
        }
        nilm_core::model::Architecture::new(self.width_scale)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("model.learning_rate must be positive"));
        }
        for &w in self.loss_w.iter().chain(&self.sweep_w) {
            nilm_core::model::LossWeights::new(w, self.loss_k)?;
        }
        if self.loss_w.is_empty() || self.sweep_w.is_empty() {
            return Err(Error::config("loss.w and sweep.w need at least one value"));
        }
        if !(self.synth_days > 0.0 && self.synth_days.is_finite()) {
            return Err(Error::config("synth.days must be positive"));
        }
        for (app, at) in &self.at {
            ThresholdSpec::activation_time(at.lambda_watts, at.mu_off_seconds, at.mu_on_seconds)
                .map_err(|e| Error::config(format!("threshold.{app}: {e}")))?;
        }
        Ok(())
    }

    pub fn source_sampling(&self) -> Result<SamplingSpec> {
        SamplingSpec::new(self.source_period)
    }

    pub fn target_sampling(&self) -> Result<SamplingSpec> {
        SamplingSpec::new(self.target_period)
    }

    pub fn stride(&self) -> usize {
        INPUT_LEN - self.overlap
    }

    pub fn data_paths(&self) -> Vec<PathBuf> {
        if self.data_paths.is_empty() {
            vec![self.out.join("household.csv")]
        } else {
            self.data_paths.clone()
        }
    }

    /// Activation-time parameters for an appliance, if configured.
    pub fn at_spec(&self, appliance: &str) -> Result<ThresholdSpec<f64>> {
        let at = self.at.get(appliance).ok_or_else(|| {
            Error::config(format!("no activation-time parameters for '{appliance}'"))
        })?;
        ThresholdSpec::activation_time(at.lambda_watts, at.mu_off_seconds, at.mu_on_seconds)
    }

    pub fn profile(&self, appliance: &str) -> Result<ApplianceProfile> {
        let p = self
            .profiles
            .get(appliance)
            .copied()
            .ok_or_else(|| Error::config(format!("no synthetic profile for '{appliance}'")))?;
        p.validate()?;
        Ok(p)
    }

    /// Every setting that influences results, as sorted key/value strings.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        put(
            "data.paths",
            join(
                &self
                    .data_paths
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>(),
            ),
        );
        put("data.aggregate", self.aggregate_column.clone());
        put("data.appliances", join(&self.appliances));
        put("data.source_period", self.source_period.to_string());
        put("data.target_period", self.target_period.to_string());
        put("data.fill_limit", self.fill_limit.to_string());
        put("window.input_len", self.input_len.to_string());
        put("window.output_len", self.output_len.to_string());
        put("window.overlap", self.overlap.to_string());
        put(
            "normalization.reference_watts",
            self.reference_watts.to_string(),
        );
        put(
            "split.mode",
            match self.split_mode {
                SplitMode::Chronological => "chronological",
                SplitMode::Random => "random",
            }
            .into(),
        );
        put("split.train", self.split.train.to_string());
        put("split.validation", self.split.validation.to_string());
        put("split.test", self.split.test.to_string());
        put(
            "split.seed",
            self.split_seed.map(|s| s.to_string()).unwrap_or_default(),
        );
        put("split.building", self.split_building.to_string());
        put("threshold.method", self.method.to_string());
        put("threshold.methods", join(&self.methods));
        for (app, at) in &self.at {
            put(
                &format!("threshold.{app}.lambda_watts"),
                at.lambda_watts.to_string(),
            );
            put(
                &format!("threshold.{app}.mu_off_seconds"),
                at.mu_off_seconds.to_string(),
            );
            put(
                &format!("threshold.{app}.mu_on_seconds"),
                at.mu_on_seconds.to_string(),
            );
        }
        put(
            "reconstruction.levels",
            match self.level_mode {
                LevelMode::Conditional => "conditional",
                LevelMode::Literal => "literal",
            }
            .into(),
        );
        put("model.width_scale", self.width_scale.to_string());
        put("model.epochs", self.epochs.to_string());
        put("model.batch_size", self.batch_size.to_string());
        put("model.learning_rate", self.learning_rate.to_string());
        put("loss.w", join(&self.loss_w));
        put("loss.k", self.loss_k.to_string());
        put("sweep.w", join(&self.sweep_w));
        put("sweep.repetitions", self.sweep_repetitions.to_string());
        put("synth.days", self.synth_days.to_string());
        put("synth.residual_sd", self.synth_residual_sd.to_string());
        for (app, p) in &self.profiles {
            put(&format!("synth.{app}.kind"), kind_name(p.kind).into());
            put(&format!("synth.{app}.on_watts"), p.on_watts.to_string());
            put(
                &format!("synth.{app}.period_seconds"),
                p.period_seconds.to_string(),
            );
            put(
                &format!("synth.{app}.on_duration_seconds"),
                p.on_duration_seconds.to_string(),
            );
            put(&format!("synth.{app}.jitter"), p.jitter.to_string());
            put(&format!("synth.{app}.noise_sd"), p.noise_sd.to_string());
        }
        m
    }

    /// Config file text that reproduces this configuration.
    pub fn to_text(&self) -> String {
        self.canonical()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of [`Self::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(text: &str) -> Vec<(String, String)> {
        parse_text(text).unwrap()
    }

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.stride(), 480);
        assert_eq!(c.at["dishwasher"].lambda_watts, 10.0);
        assert_eq!(c.at["fridge"].mu_on_seconds, 1.0);
        assert_eq!(c.epochs, 300);
        assert_eq!(c.sweep_w.len(), 11);
    }

    #[test]
    fn grammar() {
        let e = entries("# header\n\nseed = 7   # trailing\nloss.w = 0, 0.5 ,1\n");
        assert_eq!(e.len(), 2);
        let c = RunConfig::from_entries(&e).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.loss_w, vec![0.0, 0.5, 1.0]);
        assert!(parse_text("novalue\n").is_err());
        assert!(parse_text(" = 3\n").is_err());
    }

    #[test]
    fn rejects_bad_entries() {
        for bad in [
            "nope = 1",
            "loss.w = 1.5",
            "model.batch_size = 0",
            "window.input_len = 600",
            "data.target_period = 45",
            "threshold.kettle.lambda_watts = 3",
            "threshold.fridge.color = 3",
            "split.train = 0.9",
            "model.width_scale = 0",
            "split.mode = sideways",
        ] {
            assert!(RunConfig::from_entries(&entries(bad)).is_err(), "{bad}");
        }
    }

    #[test]
    fn appliance_keys_follow_the_list() {
        let c = RunConfig::from_entries(&entries(
            "threshold.kettle.lambda_watts = 2000\nthreshold.kettle.mu_off_seconds = 0\nthreshold.kettle.mu_on_seconds = 12\ndata.appliances = fridge, kettle\n",
        ))
        .unwrap();
        assert_eq!(c.appliances, vec!["fridge", "kettle"]);
        assert_eq!(c.at["kettle"].mu_on_seconds, 12.0);
        assert!(!c.at.contains_key("dishwasher"));
        assert!(c.profile("kettle").is_err());
    }

    #[test]
    fn hash_ignores_output_location_only() {
        let a = RunConfig::from_entries(&entries("out = a")).unwrap();
        let b = RunConfig::from_entries(&entries("out = b\nworkers = 4")).unwrap();
        let c = RunConfig::from_entries(&entries("seed = 43")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn text_round_trips() {
        let c = RunConfig::from_entries(&entries(
            "seed = 9\nloss.w = 0.25\nsynth.fridge.on_watts = 120",
        ))
        .unwrap();
        let d = RunConfig::from_entries(&parse_text(&c.to_text()).unwrap()).unwrap();
        assert_eq!(c, d);
    }
}
