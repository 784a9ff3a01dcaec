//! Meter CSV parsing, window normalization and dataset splits.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::{mean, Scalar};
use crate::series::{PowerSeries, SamplingSpec, WindowKind, WindowPair};

pub const DEFAULT_REFERENCE_WATTS: f64 = 2000.0;
pub const DEFAULT_FILL_LIMIT: usize = 5;

/// Which CSV columns to read and how they are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub aggregate: String,
    pub appliances: Vec<String>,
    pub sampling: SamplingSpec,
    /// Longest run of missing cells that is forward-filled.
    pub fill_limit: usize,
}

impl ColumnMap {
    pub fn new(
        aggregate: impl Into<String>,
        appliances: Vec<String>,
        sampling: SamplingSpec,
    ) -> Self {
        Self {
            aggregate: aggregate.into(),
            appliances,
            sampling,
            fill_limit: DEFAULT_FILL_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub rows_read: usize,
    /// Negative readings clamped to zero, per mapped column.
    pub clamped: HashMap<String, usize>,
    /// Missing cells forward-filled, per mapped column.
    pub filled: HashMap<String, usize>,
    /// Rows discarded because they fell outside the longest gap-free segment.
    pub rows_dropped: usize,
    pub warnings: Vec<String>,
}

impl ParseReport {
    pub fn clamped_total(&self) -> usize {
        self.clamped.values().sum()
    }
}

#[derive(Debug, Clone)]
pub struct ParsedMeter<T> {
    pub aggregate: PowerSeries<T>,
    pub appliances: Vec<PowerSeries<T>>,
    pub report: ParseReport,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "nan" | "NaN" | "NA" | "null")
}

/// Reads a meter export: a time/index column followed by watt columns.
pub fn parse_power_csv<T: Scalar>(
    path: impl AsRef<Path>,
    map: &ColumnMap,
) -> Result<ParsedMeter<T>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_power_reader(file, map)
}

pub fn parse_power_reader<T: Scalar, R: std::io::Read>(
    reader: R,
    map: &ColumnMap,
) -> Result<ParsedMeter<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::input(
            "CSV needs a time column and at least one power column",
        ));
    }
    let mut names = vec![map.aggregate.clone()];
    names.extend(map.appliances.iter().cloned());
    let mut cols = Vec::with_capacity(names.len());
    for name in &names {
        match headers.iter().skip(1).position(|h| h == name) {
            Some(i) => cols.push(i + 1),
            None => return Err(Error::config(format!("unknown column '{name}'"))),
        }
    }

    let mut report = ParseReport::default();
    // cells[c][row] is None when missing
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    let mut prev_t: Option<f64> = None;
    let mut stride: Option<f64> = None;
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Row {
            row,
            msg: e.to_string(),
        })?;
        let t: f64 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Row {
                row,
                msg: "unparsable time column".into(),
            })?;
        if let Some(p) = prev_t {
            let d = t - p;
            match stride {
                None if d > 0.0 => stride = Some(d),
                None => {
                    return Err(Error::Row {
                        row,
                        msg: "time column is not increasing".into(),
                    })
                }
                Some(s) if (d - s).abs() > 1e-6 * s.abs().max(1.0) => {
                    return Err(Error::Row {
                        row,
                        msg: format!("time stride {d} differs from {s}"),
                    })
                }
                _ => {}
            }
        }
        prev_t = Some(t);
        for (c, &col) in cols.iter().enumerate() {
            let raw = rec.get(col).unwrap_or("");
            if is_missing(raw) {
                cells[c].push(None);
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| Error::Row {
                row,
                msg: format!("unparsable value '{raw}' in column '{}'", names[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Row {
                    row,
                    msg: format!("non-finite value in column '{}'", names[c]),
                });
            }
            if v < 0.0 {
                *report.clamped.entry(names[c].clone()).or_default() += 1;
                cells[c].push(Some(0.0));
            } else {
                cells[c].push(Some(v));
            }
        }
        report.rows_read += 1;
    }
    if report.rows_read == 0 {
        return Err(Error::input("CSV has no data rows"));
    }
    let clamped = report.clamped_total();
    if clamped > 0 {
        report
            .warnings
            .push(format!("clamped {clamped} negative readings to 0"));
    }

    // Forward-fill short gaps; mark rows inside long or leading gaps as breaks.
    let n = report.rows_read;
    let mut broken = vec![false; n];
    let mut filled_cols: Vec<Vec<f64>> = Vec::with_capacity(names.len());
    for (c, col) in cells.iter().enumerate() {
        let mut out = vec![0.0; n];
        let mut i = 0;
        while i < n {
            match col[i] {
                Some(v) => {
                    out[i] = v;
                    i += 1;
                }
                None => {
                    let start = i;
                    while i < n && col[i].is_none() {
                        i += 1;
                    }
                    let len = i - start;
                    if start > 0 && len <= map.fill_limit {
                        let v = out[start - 1];
                        out[start..i].iter_mut().for_each(|x| *x = v);
                        *report.filled.entry(names[c].clone()).or_default() += len;
                    } else {
                        broken[start..i].iter_mut().for_each(|b| *b = true);
                    }
                }
            }
        }
        filled_cols.push(out);
    }

    let (seg_start, seg_end) = longest_unbroken(&broken)
        .ok_or_else(|| Error::input("no gap-free segment remains after gap handling"))?;
    if seg_end - seg_start < n {
        report.rows_dropped = n - (seg_end - seg_start);
        report.warnings.push(format!(
            "gaps longer than {} samples split the series; kept rows {}..{} of {n}",
            map.fill_limit, seg_start, seg_end
        ));
    }

    let mut series = filled_cols.into_iter().zip(&names).map(|(col, name)| {
        let vals = col[seg_start..seg_end].iter().map(|&v| T::lit(v)).collect();
        PowerSeries::new(vals, map.sampling, name.clone())
    });
    let aggregate = series.next().expect("aggregate column")?;
    let appliances = series.collect::<Result<Vec<_>>>()?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(ParsedMeter {
        aggregate,
        appliances,
        report,
    })
}

/// First longest run of `false` entries as a half-open range.
fn longest_unbroken(broken: &[bool]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < broken.len() {
        if broken[i] {
            i += 1;
            continue;
        }
        let s = i;
        while i < broken.len() && !broken[i] {
            i += 1;
        }
        if best.is_none_or(|(bs, be)| i - s > be - bs) {
            best = Some((s, i));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub reference_power_watts: f64,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        Self {
            reference_power_watts: DEFAULT_REFERENCE_WATTS,
        }
    }
}

impl NormalizationSpec {
    pub fn new(reference_power_watts: f64) -> Result<Self> {
        if !(reference_power_watts > 0.0 && reference_power_watts.is_finite()) {
            return Err(Error::config("reference power must be positive"));
        }
        Ok(Self {
            reference_power_watts,
        })
    }
}

/// Centers the input on its mean and scales both sides by the reference power.
///
/// Classification targets are left untouched.
pub fn normalize_pair<T: Scalar>(pair: &WindowPair<T>, spec: NormalizationSpec) -> WindowPair<T> {
    let r = T::lit(spec.reference_power_watts);
    let m = mean(&pair.input).unwrap_or_else(T::zero);
    let target = match pair.kind {
        WindowKind::Regression => pair.target.iter().map(|&v| v / r).collect(),
        WindowKind::Classification => pair.target.clone(),
    };
    WindowPair {
        input: pair.input.iter().map(|&v| (v - m) / r).collect(),
        target,
        kind: pair.kind,
        window_mean_watts: m,
        start: pair.start,
    }
}

/// Inverse of the input normalization: watts from a normalized input window.
pub fn denormalize_input<T: Scalar>(pair: &WindowPair<T>, spec: NormalizationSpec) -> Vec<T> {
    let r = T::lit(spec.reference_power_watts);
    pair.input
        .iter()
        .map(|&v| v * r + pair.window_mean_watts)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub pairs: Vec<WindowPair<T>>,
    pub split: SplitTag,
    pub appliance: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        pairs: Vec<WindowPair<T>>,
        split: SplitTag,
        appliance: impl Into<String>,
    ) -> Result<Self> {
        if let Some(first) = pairs.first() {
            if pairs.iter().any(|p| p.kind != first.kind) {
                return Err(Error::input(
                    "dataset mixes regression and classification pairs",
                ));
            }
        }
        Ok(Self {
            pairs,
            split,
            appliance: appliance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let f = Self {
            train,
            validation,
            test,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("split fractions must lie in [0, 1]"));
        }
        if parts.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::config("split fractions sum to more than 1"));
        }
        Ok(())
    }

    /// (train, validation, test) sizes for `n` items: floors for train and
    /// validation, the remainder to test when the fractions sum to one.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let val = floor(self.validation).min(n - train);
        let rest = n - train - val;
        let test = if (self.train + self.validation + self.test - 1.0).abs() < 1e-9 {
            rest
        } else {
            floor(self.test).min(rest)
        };
        (train, val, test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Dataset<T>,
    pub validation: Dataset<T>,
    pub test: Dataset<T>,
}

/// Train takes the leading fraction of every building; validation and test
/// follow on the designated building only.
pub fn chronological_split<T: Scalar>(
    per_building: &[Vec<WindowPair<T>>],
    fractions: SplitFractions,
    val_test_building: usize,
    appliance: &str,
) -> Result<Splits<T>> {
    fractions.validate()?;
    if val_test_building >= per_building.len() {
        return Err(Error::config(format!(
            "building index {val_test_building} out of range for {} buildings",
            per_building.len()
        )));
    }
    let mut train = Vec::new();
    for pairs in per_building {
        let (n_train, _, _) = fractions.sizes(pairs.len());
        train.extend_from_slice(&pairs[..n_train]);
    }
    let pairs = &per_building[val_test_building];
    let (n_train, n_val, n_test) = fractions.sizes(pairs.len());
    let validation = pairs[n_train..n_train + n_val].to_vec();
    let test = pairs[n_train + n_val..n_train + n_val + n_test].to_vec();
    Ok(Splits {
        train: Dataset::new(train, SplitTag::Train, appliance)?,
        validation: Dataset::new(validation, SplitTag::Validation, appliance)?,
        test: Dataset::new(test, SplitTag::Test, appliance)?,
    })
}

/// Seeded shuffle followed by a fraction split.
pub fn random_split<T: Scalar>(
    pairs: &[WindowPair<T>],
    fractions: SplitFractions,
    seed: u64,
    appliance: &str,
) -> Result<Splits<T>> {
    fractions.validate()?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let (n_train, n_val, n_test) = fractions.sizes(pairs.len());
    let take = |r: std::ops::Range<usize>| {
        order[r]
            .iter()
            .map(|&i| pairs[i].clone())
            .collect::<Vec<_>>()
    };
    Ok(Splits {
        train: Dataset::new(take(0..n_train), SplitTag::Train, appliance)?,
        validation: Dataset::new(
            take(n_train..n_train + n_val),
            SplitTag::Validation,
            appliance,
        )?,
        test: Dataset::new(
            take(n_train + n_val..n_train + n_val + n_test),
            SplitTag::Test,
            appliance,
        )?,
    })
}

/// Percentage of ON entries over all classification targets.
pub fn activation_fraction<T: Scalar>(statuses: &Dataset<T>) -> Result<f64> {
    let mut on = 0usize;
    let mut total = 0usize;
    for p in &statuses.pairs {
        if p.kind != WindowKind::Classification {
            return Err(Error::input(
                "activation fraction needs classification targets",
            ));
        }
        on += p.target.iter().filter(|&&v| v >= T::lit(0.5)).count();
        total += p.target.len();
    }
    if total == 0 {
        return Err(Error::input("activation fraction of an empty dataset"));
    }
    Ok(100.0 * on as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{INPUT_LEN, OUTPUT_LEN};

    fn map(apps: &[&str]) -> ColumnMap {
        ColumnMap::new(
            "agg",
            apps.iter().map(|s| s.to_string()).collect(),
            SamplingSpec::new(60).unwrap(),
        )
    }

    fn parse(text: &str, m: &ColumnMap) -> Result<ParsedMeter<f64>> {
        parse_power_reader(text.as_bytes(), m)
    }

    #[test]
    fn direct_read() {
        let p = parse(
            "t,agg,fridge\n0,100,80\n60,120,90\n120,110,85\n",
            &map(&["fridge"]),
        )
        .unwrap();
        assert_eq!(p.aggregate.values(), &[100.0, 120.0, 110.0]);
        assert_eq!(p.appliances[0].values(), &[80.0, 90.0, 85.0]);
        assert_eq!(p.appliances[0].label(), "fridge");
        assert!(p.report.warnings.is_empty());
    }

    #[test]
    fn missing_cell_forward_filled() {
        let p = parse(
            "t,agg,fridge\n0,100,80\n60,120,\n120,110,85\n",
            &map(&["fridge"]),
        )
        .unwrap();
        assert_eq!(p.appliances[0].values(), &[80.0, 80.0, 85.0]);
        assert_eq!(p.report.filled["fridge"], 1);
    }

    #[test]
    fn negative_clamped() {
        let p = parse("t,agg,fridge\n0,100,-5\n60,120,90\n", &map(&["fridge"])).unwrap();
        assert_eq!(p.appliances[0].values(), &[0.0, 90.0]);
        assert_eq!(p.report.clamped_total(), 1);
        assert_eq!(p.report.warnings.len(), 1);
    }

    #[test]
    fn long_gap_keeps_longest_segment() {
        let mut text = String::from("t,agg,fridge\n");
        for i in 0..20 {
            let f = if (3..10).contains(&i) {
                String::new()
            } else {
                format!("{i}")
            };
            text.push_str(&format!("{},{},{}\n", i * 60, 100 + i, f));
        }
        let p = parse(&text, &map(&["fridge"])).unwrap();
        assert_eq!(p.aggregate.len(), 10);
        assert_eq!(p.aggregate.values()[0], 110.0);
        assert_eq!(p.report.rows_dropped, 10);
        assert_eq!(p.report.warnings.len(), 1);
    }

    #[test]
    fn gap_at_limit_is_filled() {
        let mut text = String::from("t,agg,fridge\n");
        for i in 0..10 {
            let f = if (2..7).contains(&i) {
                String::new()
            } else {
                "7".to_string()
            };
            text.push_str(&format!("{},{},{}\n", i, 1, f));
        }
        let p = parse(&text, &map(&["fridge"])).unwrap();
        assert_eq!(p.aggregate.len(), 10);
        assert_eq!(p.report.filled["fridge"], 5);
    }

    #[test]
    fn errors_are_classified() {
        assert!(matches!(
            parse("t,agg\n0,1\n", &map(&["kettle"])),
            Err(Error::Config(_))
        ));
        match parse("t,agg,fridge\n0,1,2\n60,abc,3\n", &map(&["fridge"])) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("t,agg,fridge\n0,1,2\n60,1,3\n200,1,1\n", &map(&["fridge"])),
            Err(Error::Row { row: 4, .. })
        ));
    }

    fn raw_pair(input: f64, target: f64) -> WindowPair<f64> {
        WindowPair {
            input: vec![input; INPUT_LEN],
            target: vec![target; OUTPUT_LEN],
            kind: WindowKind::Regression,
            window_mean_watts: 0.0,
            start: 0,
        }
    }

    #[test]
    fn normalization_cases() {
        let n = normalize_pair(&raw_pair(2000.0, 1000.0), NormalizationSpec::default());
        assert!(n.input.iter().all(|&v| v == 0.0));
        assert_eq!(n.window_mean_watts, 2000.0);
        assert!(n.target.iter().all(|&v| v == 0.5));
        let n = normalize_pair(
            &raw_pair(10.0, 1000.0),
            NormalizationSpec::new(1000.0).unwrap(),
        );
        assert!(n.target.iter().all(|&v| v == 1.0));
        assert!(NormalizationSpec::new(0.0).is_err());
    }

    #[test]
    fn classification_targets_not_scaled() {
        let mut p = raw_pair(5.0, 1.0);
        p.kind = WindowKind::Classification;
        let n = normalize_pair(&p, NormalizationSpec::default());
        assert!(n.target.iter().all(|&v| v == 1.0));
    }

    fn numbered(n: usize) -> Vec<WindowPair<f64>> {
        (0..n)
            .map(|i| {
                let mut p = raw_pair(i as f64, 0.0);
                p.start = i;
                p
            })
            .collect()
    }

    fn starts(d: &Dataset<f64>) -> Vec<usize> {
        d.pairs.iter().map(|p| p.start).collect()
    }

    #[test]
    fn chronological_one_building() {
        let s =
            chronological_split(&[numbered(10)], SplitFractions::default(), 0, "fridge").unwrap();
        assert_eq!(starts(&s.train), (0..8).collect::<Vec<_>>());
        assert_eq!(starts(&s.validation), vec![8]);
        assert_eq!(starts(&s.test), vec![9]);
    }

    #[test]
    fn chronological_three_buildings() {
        let b = vec![numbered(10), numbered(10), numbered(10)];
        let s = chronological_split(&b, SplitFractions::default(), 0, "fridge").unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (24, 1, 1)
        );
        assert!(chronological_split(&b, SplitFractions::default(), 3, "fridge").is_err());
    }

    #[test]
    fn degenerate_fractions() {
        let f = SplitFractions::new(1.0, 0.0, 0.0).unwrap();
        let s = chronological_split(&[numbered(10)], f, 0, "x").unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (10, 0, 0)
        );
        assert!(SplitFractions::new(0.8, 0.2, 0.1).is_err());
        assert_eq!(SplitFractions::default().sizes(41), (32, 4, 5));
    }

    #[test]
    fn random_split_is_seeded_partition() {
        let pairs = numbered(100);
        let a = random_split(&pairs, SplitFractions::default(), 42, "x").unwrap();
        let b = random_split(&pairs, SplitFractions::default(), 42, "x").unwrap();
        assert_eq!(a, b);
        assert_eq!(
            (a.train.len(), a.validation.len(), a.test.len()),
            (80, 10, 10)
        );
        let mut all: Vec<usize> =
            [starts(&a.train), starts(&a.validation), starts(&a.test)].concat();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let c = random_split(&pairs, SplitFractions::default(), 43, "x").unwrap();
        assert_ne!(starts(&a.train), starts(&c.train));
    }

    #[test]
    fn activation_fraction_cases() {
        let mut on = raw_pair(0.0, 1.0);
        on.kind = WindowKind::Classification;
        let mut off = raw_pair(0.0, 0.0);
        off.kind = WindowKind::Classification;
        let d = Dataset::new(vec![on.clone()], SplitTag::Train, "x").unwrap();
        assert_eq!(activation_fraction(&d).unwrap(), 100.0);
        let d = Dataset::new(vec![on, off], SplitTag::Train, "x").unwrap();
        assert_eq!(activation_fraction(&d).unwrap(), 50.0);
        let empty = Dataset::<f64>::new(vec![], SplitTag::Train, "x").unwrap();
        assert!(activation_fraction(&empty).is_err());
    }
}
