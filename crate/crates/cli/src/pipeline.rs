//! Shared data preparation: load meters, resample, cut windows, derive
//! thresholds from the training split and build model samples.

use std::collections::BTreeMap;

use nilm_core::ingestion::{
    chronological_split, normalize_pair, parse_power_csv, random_split, ColumnMap, Dataset,
    NormalizationSpec, SplitTag, Splits,
};
use nilm_core::model::{samples_from, Sample};
use nilm_core::reconstruction::{LevelAccumulator, OnOffLevels};
use nilm_core::rng::derive_seed_labeled;
use nilm_core::series::{
    resample_mean, windowize, with_status_targets, PowerSeries, SamplingSpec, StatusSeries,
};
use nilm_core::thresholding::{
    apply_threshold, derive_threshold, kmeans_1d_two, ClusterSummary, ThresholdMethod,
    ThresholdSpec,
};
use nilm_core::{Error, Result};

use crate::config::{RunConfig, SplitMode};

/// One building at the target resolution.
#[derive(Debug, Clone)]
pub struct Meter {
    pub aggregate: PowerSeries<f64>,
    pub appliances: Vec<PowerSeries<f64>>,
}

pub fn load_meters(cfg: &RunConfig) -> Result<Vec<Meter>> {
    let source = cfg.source_sampling()?;
    let target = cfg.target_sampling()?;
    let mut map = ColumnMap::new(cfg.aggregate_column.clone(), cfg.appliances.clone(), source);
    map.fill_limit = cfg.fill_limit;
    let mut meters = Vec::new();
    for path in cfg.data_paths() {
        if !path.exists() {
            return Err(Error::input(format!(
                "data file {} not found",
                path.display()
            )));
        }
        let parsed = parse_power_csv::<f64>(&path, &map)?;
        for w in &parsed.report.warnings {
            log::warn!("{}: {w}", path.display());
        }
        meters.push(Meter {
            aggregate: resample_mean(&parsed.aggregate, target)?,
            appliances: parsed
                .appliances
                .iter()
                .map(|a| resample_mean(a, target))
                .collect::<Result<_>>()?,
        });
    }
    if cfg.split_building >= meters.len() {
        return Err(Error::config(format!(
            "split.building = {} but only {} data file(s) configured",
            cfg.split_building,
            meters.len()
        )));
    }
    Ok(meters)
}

/// Status targets and levels of one thresholding method.
#[derive(Debug, Clone)]
pub struct MethodData {
    pub spec: ThresholdSpec<f64>,
    /// Full-length status per building.
    pub status: Vec<StatusSeries>,
    /// Classification windows (raw inputs, binary targets).
    pub windows: Splits<f64>,
    /// Levels over the test span.
    pub test_levels: OnOffLevels<f64>,
}

#[derive(Debug, Clone)]
pub struct ApplianceData {
    pub name: String,
    pub sampling: SamplingSpec,
    /// Regression windows in watts.
    pub windows: Splits<f64>,
    pub train_power: PowerSeries<f64>,
    /// Two-cluster summary of the training power, when it has two distinct values.
    pub summary: Option<ClusterSummary<f64>>,
    pub methods: BTreeMap<ThresholdMethod, MethodData>,
}

fn split(
    cfg: &RunConfig,
    per_building: &[Vec<nilm_core::series::WindowPair<f64>>],
    name: &str,
) -> Result<Splits<f64>> {
    match cfg.split_mode {
        SplitMode::Chronological => {
            chronological_split(per_building, cfg.split, cfg.split_building, name)
        }
        SplitMode::Random => {
            let all: Vec<_> = per_building.iter().flatten().cloned().collect();
            let seed = cfg
                .split_seed
                .unwrap_or_else(|| derive_seed_labeled(cfg.seed, "split"));
            random_split(&all, cfg.split, seed, name)
        }
    }
}

/// Concatenated targets of a dataset, as a series.
pub fn target_series(
    ds: &Dataset<f64>,
    sampling: SamplingSpec,
    label: &str,
) -> Result<PowerSeries<f64>> {
    let values: Vec<f64> = ds
        .pairs
        .iter()
        .flat_map(|p| p.target.iter().copied())
        .collect();
    if values.is_empty() {
        return Err(Error::input(format!(
            "'{label}': {:?} split has no windows",
            ds.split
        )));
    }
    PowerSeries::new(values, sampling, label)
}

pub fn status_rows(ds: &Dataset<f64>) -> Vec<Vec<u8>> {
    ds.pairs
        .iter()
        .map(|p| p.target.iter().map(|&v| u8::from(v >= 0.5)).collect())
        .collect()
}

pub fn prepare(
    cfg: &RunConfig,
    meters: &[Meter],
    methods: &[ThresholdMethod],
) -> Result<Vec<ApplianceData>> {
    let sampling = cfg.target_sampling()?;
    let mut out = Vec::with_capacity(cfg.appliances.len());
    for (i, name) in cfg.appliances.iter().enumerate() {
        let raw: Vec<Vec<_>> = meters
            .iter()
            .map(|m| windowize(&m.aggregate, &m.appliances[i], cfg.stride()))
            .collect::<Result<_>>()?;
        let windows = split(cfg, &raw, name)?;
        let train_power = target_series(&windows.train, sampling, name)?;
        let summary = match kmeans_1d_two(train_power.values()) {
            Ok(s) => Some(s),
            Err(Error::DegenerateClusters(msg)) => {
                log::warn!("'{name}': {msg}");
                None
            }
            Err(e) => return Err(e),
        };
        let test_power = target_series(&windows.test, sampling, name)?;

        let mut by_method = BTreeMap::new();
        for &method in methods {
            let at = if method == ThresholdMethod::ActivationTime {
                Some(cfg.at_spec(name)?)
            } else {
                None
            };
            let spec = derive_threshold(&train_power, method, at.as_ref())
                .map_err(|e| Error::input(format!("'{name}' {method}: {e}")))?;
            let status: Vec<StatusSeries> = meters
                .iter()
                .map(|m| apply_threshold(&m.appliances[i], &spec))
                .collect();
            let cls: Vec<Vec<_>> = raw
                .iter()
                .zip(&status)
                .map(|(pairs, s)| with_status_targets(pairs, s))
                .collect::<Result<_>>()?;
            let cls = split(cfg, &cls, name)?;
            let mut acc = LevelAccumulator::new();
            let test_status: Vec<u8> = status_rows(&cls.test).concat();
            acc.add(test_power.values(), &test_status)?;
            by_method.insert(
                method,
                MethodData {
                    spec,
                    status,
                    windows: cls,
                    test_levels: acc.levels(cfg.level_mode),
                },
            );
        }
        out.push(ApplianceData {
            name: name.clone(),
            sampling,
            windows,
            train_power,
            summary,
            methods: by_method,
        });
    }
    Ok(out)
}

/// Normalized train/validation/test samples for one appliance and method.
#[derive(Debug, Clone)]
pub struct SampleSets {
    pub train: Vec<Sample<f64>>,
    pub validation: Vec<Sample<f64>>,
    pub test: Vec<Sample<f64>>,
}

fn normalized(ds: &Dataset<f64>, norm: NormalizationSpec, tag: SplitTag) -> Result<Dataset<f64>> {
    Dataset::new(
        ds.pairs.iter().map(|p| normalize_pair(p, norm)).collect(),
        tag,
        ds.appliance.clone(),
    )
}

pub fn samples(
    cfg: &RunConfig,
    app: &ApplianceData,
    method: ThresholdMethod,
) -> Result<SampleSets> {
    let norm = NormalizationSpec::new(cfg.reference_watts)?;
    let md = app
        .methods
        .get(&method)
        .ok_or_else(|| Error::config(format!("method {method} was not prepared")))?;
    let pair = |r: &Dataset<f64>, c: &Dataset<f64>, tag| {
        samples_from(&normalized(r, norm, tag)?, &normalized(c, norm, tag)?)
    };
    Ok(SampleSets {
        train: pair(&app.windows.train, &md.windows.train, SplitTag::Train)?,
        validation: pair(
            &app.windows.validation,
            &md.windows.validation,
            SplitTag::Validation,
        )?,
        test: pair(&app.windows.test, &md.windows.test, SplitTag::Test)?,
    })
}
