use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nilm_core::ingestion::activation_fraction;
use nilm_core::metrics::{
    confusion, f1_per_series, mae, predicted_status, roc_auc, ConfusionCounts,
};
use nilm_core::model::{
    checkpoint, predict, train, AdamConfig, Architecture, LossWeights, ModelParams, Sample,
    TrainConfig, TrainOutcome,
};
use nilm_core::reconstruction::{reconstruct_values, reconstruction_mae};
use nilm_core::rng::{derive_seed, derive_seed_labeled};
use nilm_core::series::{PowerSeries, TARGET_OFFSET};
use nilm_core::synth::generate_household;
use nilm_core::thresholding::{apply_threshold, ThresholdMethod};
use nilm_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::pipeline::{load_meters, prepare, samples, status_rows, target_series, ApplianceData};
use crate::report::{cell, num, opt, write_json, Csv};

fn ensure_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(())
}

/// Runs independent jobs on up to `workers` threads; results keep job order.
pub fn run_pool<J: Sync, R: Send>(
    jobs: &[J],
    workers: usize,
    f: impl Fn(&J) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("job ran"))
        .collect()
}

pub fn synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    let sampling = cfg.source_sampling()?;
    let length = (cfg.synth_days * 86400.0 / cfg.source_period as f64).floor() as usize;
    let profiles = cfg
        .appliances
        .iter()
        .map(|a| Ok((a.clone(), cfg.profile(a)?)))
        .collect::<Result<Vec<_>>>()?;
    let h = generate_household::<f64>(
        &profiles,
        cfg.synth_residual_sd,
        length,
        sampling,
        derive_seed_labeled(cfg.seed, "synth"),
    )?;

    let mut header = vec!["time", cfg.aggregate_column.as_str()];
    header.extend(cfg.appliances.iter().map(String::as_str));
    let mut household = Csv::new(&header);
    let mut truth = Csv::new(&[&["time"], &header[2..]].concat());
    for i in 0..length {
        let t = (i as u64 * cfg.source_period as u64).to_string();
        let mut row = vec![t.clone(), h.aggregate.values()[i].to_string()];
        row.extend(h.appliances.iter().map(|a| a.values()[i].to_string()));
        household.row(&row);
        let mut row = vec![t];
        row.extend(h.truths.iter().map(|s| s.values()[i].to_string()));
        truth.row(&row);
    }
    let apps: Vec<Value> = profiles
        .iter()
        .zip(h.appliances.iter().zip(&h.truths))
        .map(|((name, p), (power, status))| {
            json!({
                "appliance": name,
                "kind": format!("{:?}", p.kind),
                "on_watts": num(p.on_watts),
                "mean_watts": num(power.values().iter().sum::<f64>() / length as f64),
                "on_fraction": num(status.count_on() as f64 / length as f64),
            })
        })
        .collect();
    let files = [
        cfg.out.join("household.csv"),
        cfg.out.join("truth_status.csv"),
        cfg.out.join("synth.json"),
    ];
    household.write(&files[0])?;
    truth.write(&files[1])?;
    write_json(
        &files[2],
        &json!({
            "config_hash": cfg.hash(),
            "period_seconds": cfg.source_period,
            "samples": length,
            "appliances": apps,
        }),
    )?;
    Ok(files.to_vec())
}

pub fn threshold(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    let meters = load_meters(cfg)?;
    let apps = prepare(cfg, &meters, &ThresholdMethod::ALL)?;
    let mut files = Vec::new();
    let mut thresholds = Vec::new();
    let mut recon = Vec::new();
    let b = cfg.split_building;
    for app in &apps {
        let s = app.summary;
        for (method, md) in &app.methods {
            thresholds.push(json!({
                "appliance": app.name,
                "method": method.tag(),
                "lambda_watts": num(md.spec.lambda_watts),
                "mu_off_seconds": num(md.spec.mu_off_seconds),
                "mu_on_seconds": num(md.spec.mu_on_seconds),
                "m0": opt(s.map(|s| s.m0)),
                "m1": opt(s.map(|s| s.m1)),
                "sigma0": opt(s.map(|s| s.sigma0)),
                "sigma1": opt(s.map(|s| s.sigma1)),
                "train_on_percent": num(activation_fraction(&md.windows.train)?),
            }));

            let test_power = target_series(&app.windows.test, app.sampling, &app.name)?;
            let test_status = status_rows(&md.windows.test).concat();
            let err = reconstruction_mae(test_power.values(), &test_status, md.test_levels)?;
            recon.push(json!({
                "appliance": app.name,
                "method": method.tag(),
                "p_on": num(md.test_levels.p_on),
                "p_off": num(md.test_levels.p_off),
                "intrinsic_error_watts": num(err),
            }));

            let rebuilt = reconstruct_values(&test_status, md.test_levels);
            let mut csv = Csv::new(&["time_index", "power_watts", "reconstructed_watts"]);
            let idx = app
                .windows
                .test
                .pairs
                .iter()
                .flat_map(|p| (0..p.target.len()).map(move |t| p.start + TARGET_OFFSET + t));
            for ((i, &p), &r) in idx.zip(test_power.values()).zip(&rebuilt) {
                csv.row(&[i.to_string(), cell(p), cell(r)]);
            }
            let path = cfg
                .out
                .join(format!("reconstruction_{}_{}.csv", app.name, method.tag()));
            csv.write(&path)?;
            files.push(path);
        }

        let power = &meters[b].appliances[cfg
            .appliances
            .iter()
            .position(|a| *a == app.name)
            .expect("known appliance")];
        let st = |m: ThresholdMethod| app.methods[&m].status[b].values();
        let mut csv = Csv::new(&["time", "power", "status_mp", "status_vs", "status_at"]);
        for (i, &p) in power.values().iter().enumerate() {
            csv.row(&[
                (i as u64 * cfg.target_period as u64).to_string(),
                cell(p),
                st(ThresholdMethod::MiddlePoint)[i].to_string(),
                st(ThresholdMethod::VarianceSensitive)[i].to_string(),
                st(ThresholdMethod::ActivationTime)[i].to_string(),
            ]);
        }
        let path = cfg.out.join(format!("status_overlay_{}.csv", app.name));
        csv.write(&path)?;
        files.push(path);
    }
    let path = cfg.out.join("thresholds.json");
    write_json(
        &path,
        &json!({"config_hash": cfg.hash(), "thresholds": thresholds}),
    )?;
    files.push(path);
    let path = cfg.out.join("reconstruction.json");
    write_json(
        &path,
        &json!({"config_hash": cfg.hash(), "level_mode": format!("{:?}", cfg.level_mode).to_lowercase(), "reconstruction": recon}),
    )?;
    files.push(path);
    files.sort();
    Ok(files)
}

fn fmt_w(w: f64) -> String {
    w.to_string()
}

/// Checkpoint stem. Pure regression ignores the status targets, so it is
/// shared by every thresholding method.
pub fn model_stem(app: &str, method: ThresholdMethod, w: f64) -> String {
    if w == 0.0 {
        format!("model_{app}_w0")
    } else {
        format!("model_{app}_{}_w{}", method.tag(), fmt_w(w))
    }
}

fn train_config(cfg: &RunConfig, app: &str, w: f64, base_seed: u64) -> Result<TrainConfig> {
    Ok(TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: AdamConfig {
            lr: cfg.learning_rate,
            ..AdamConfig::default()
        },
        weights: LossWeights::new(w, cfg.loss_k)?,
        seed: derive_seed_labeled(base_seed, &format!("shuffle/{app}")),
        reference_watts: cfg.reference_watts,
    })
}

fn train_one(
    cfg: &RunConfig,
    app: &str,
    sets: &crate::pipeline::SampleSets,
    w: f64,
    base_seed: u64,
) -> Result<TrainOutcome<f64>> {
    let arch = Architecture::new(cfg.width_scale)?;
    let init =
        ModelParams::<f64>::init(arch, derive_seed_labeled(base_seed, &format!("init/{app}")));
    let tc = train_config(cfg, app, w, base_seed)?;
    train(init, &sets.train, &sets.validation, &tc)
}

struct TrainJob<'a> {
    app: &'a ApplianceData,
    method: ThresholdMethod,
    w: f64,
}

pub fn train_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    let meters = load_meters(cfg)?;
    let apps = prepare(cfg, &meters, &cfg.methods)?;
    let mut jobs = Vec::new();
    for app in &apps {
        let mut ws = cfg.loss_w.clone();
        ws.sort_by(f64::total_cmp);
        ws.dedup();
        for &w in &ws {
            if w == 0.0 {
                jobs.push(TrainJob {
                    app,
                    method: cfg.methods[0],
                    w,
                });
            } else {
                jobs.extend(
                    cfg.methods
                        .iter()
                        .map(|&method| TrainJob { app, method, w }),
                );
            }
        }
    }
    let outcomes = run_pool(&jobs, cfg.workers, |j| {
        let sets = samples(cfg, j.app, j.method)?;
        log::info!(
            "training {} w={}",
            model_stem(&j.app.name, j.method, j.w),
            j.w
        );
        train_one(cfg, &j.app.name, &sets, j.w, cfg.seed)
    })?;

    let mut files = Vec::new();
    let mut runs = Vec::new();
    for (j, out) in jobs.iter().zip(&outcomes) {
        let stem = model_stem(&j.app.name, j.method, j.w);
        let ckpt = cfg.out.join(format!("{stem}.ckpt"));
        checkpoint::save(&out.best, &ckpt)?;
        let mut csv = Csv::new(&["epoch", "train_loss", "val_loss", "val_f1", "val_mae_watts"]);
        for r in &out.history {
            csv.row(&[
                r.epoch.to_string(),
                cell(r.train_loss),
                cell(r.val_loss),
                cell(r.val_f1),
                cell(r.val_mae_watts),
            ]);
        }
        let hist = cfg.out.join(format!("history_{stem}.csv"));
        csv.write(&hist)?;
        let best = out.history.iter().find(|r| r.epoch == out.best_epoch);
        runs.push(json!({
            "appliance": j.app.name,
            "method": if j.w == 0.0 { Value::Null } else { json!(j.method.tag()) },
            "w": num(j.w),
            "checkpoint": format!("{stem}.ckpt"),
            "best_epoch": out.best_epoch,
            "val_loss": opt(best.map(|r| r.val_loss)),
            "val_f1": opt(best.map(|r| r.val_f1)),
            "val_mae_watts": opt(best.map(|r| r.val_mae_watts)),
        }));
        files.push(ckpt);
        files.push(hist);
    }
    let path = cfg.out.join("train.json");
    write_json(&path, &json!({"config_hash": cfg.hash(), "runs": runs}))?;
    files.push(path);
    Ok(files)
}

/// Test-split scores of one classification model and one regression model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub f1: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub auc: Option<f64>,
    pub mae_watts: f64,
    pub reconstructed_mae_watts: f64,
    pub regression_f1: f64,
    pub intrinsic_error_watts: f64,
}

fn predictions(
    model: &ModelParams<f64>,
    test: &[Sample<f64>],
    batch: usize,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let inputs: Vec<&[f64]> = test.iter().map(|s| s.input.as_slice()).collect();
    predict(model, &inputs, batch)
}

pub fn score(
    cfg: &RunConfig,
    app: &ApplianceData,
    method: ThresholdMethod,
    classifier: &ModelParams<f64>,
    regressor: &ModelParams<f64>,
) -> Result<Scores> {
    let sets = samples(cfg, app, method)?;
    let md = &app.methods[&method];
    let truth = status_rows(&md.windows.test);
    let watts: Vec<&[f64]> = app
        .windows
        .test
        .pairs
        .iter()
        .map(|p| p.target.as_slice())
        .collect();

    let cls = predictions(classifier, &sets.test, cfg.batch_size)?;
    let mut per_window = Vec::with_capacity(cls.len());
    let mut recon_err = 0.0;
    let mut n = 0usize;
    for ((prob, _), (y, w)) in cls.iter().zip(truth.iter().zip(&watts)) {
        let pred = predicted_status(prob);
        per_window.push(confusion(&pred, y)?);
        for (r, &p) in reconstruct_values(&pred, md.test_levels)
            .iter()
            .zip(w.iter())
        {
            recon_err += (r - p).abs();
        }
        n += w.len();
    }
    let pooled: ConfusionCounts = per_window.iter().copied().sum();
    let scores: Vec<f64> = cls.iter().flat_map(|(p, _)| p.iter().copied()).collect();
    let auc = match roc_auc(&scores, &truth.concat()) {
        Ok(a) => Some(a),
        Err(Error::UndefinedMetric(msg)) => {
            log::warn!("'{}' {method}: {msg}", app.name);
            None
        }
        Err(e) => return Err(e),
    };

    let reg = predictions(regressor, &sets.test, cfg.batch_size)?;
    let mut reg_windows = Vec::with_capacity(reg.len());
    let mut pred_all = Vec::new();
    let mut truth_all = Vec::new();
    for ((_, power), (y, s)) in reg.iter().zip(truth.iter().zip(&sets.test)) {
        pred_all.extend_from_slice(power);
        truth_all.extend_from_slice(&s.power);
        let w: Vec<f64> = power
            .iter()
            .map(|&p| (p * cfg.reference_watts).max(0.0))
            .collect();
        let status = apply_threshold(
            &PowerSeries::new(w, app.sampling, app.name.clone())?,
            &md.spec,
        );
        reg_windows.push(confusion(status.values(), y)?);
    }
    let test_status = truth.concat();
    let test_power: Vec<f64> = watts.concat();
    Ok(Scores {
        f1: f1_per_series(&per_window)?,
        precision: pooled.precision(),
        recall: pooled.recall(),
        auc,
        mae_watts: mae(&pred_all, &truth_all, cfg.reference_watts)?,
        reconstructed_mae_watts: recon_err / n as f64,
        regression_f1: f1_per_series(&reg_windows)?,
        intrinsic_error_watts: reconstruction_mae(&test_power, &test_status, md.test_levels)?,
    })
}

fn load_model(dir: &Path, stem: &str) -> Result<ModelParams<f64>> {
    let path = dir.join(format!("{stem}.ckpt"));
    if !path.exists() {
        return Err(Error::input(format!(
            "checkpoint {} not found; run `train` first",
            path.display()
        )));
    }
    checkpoint::load(&path)
}

pub fn evaluate(cfg: &RunConfig, checkpoint_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    let dir = checkpoint_dir.unwrap_or(&cfg.out);
    let meters = load_meters(cfg)?;
    let apps = prepare(cfg, &meters, &cfg.methods)?;
    let class_w = cfg
        .loss_w
        .iter()
        .copied()
        .filter(|&w| w > 0.0)
        .fold(None, |a: Option<f64>, w| Some(a.map_or(w, |a| a.max(w))))
        .ok_or_else(|| Error::config("evaluate needs a loss.w value above 0 for the classifier"))?;
    let reg_w = cfg
        .loss_w
        .iter()
        .copied()
        .filter(|&w| w < 1.0)
        .fold(None, |a: Option<f64>, w| Some(a.map_or(w, |a| a.min(w))))
        .ok_or_else(|| Error::config("evaluate needs a loss.w value below 1 for the regressor"))?;

    let mut cells = Vec::new();
    for app in &apps {
        for &method in &cfg.methods {
            let cstem = model_stem(&app.name, method, class_w);
            let rstem = model_stem(&app.name, method, reg_w);
            let s = score(
                cfg,
                app,
                method,
                &load_model(dir, &cstem)?,
                &load_model(dir, &rstem)?,
            )?;
            cells.push(json!({
                "appliance": app.name,
                "method": method.tag(),
                "model": "CONV",
                "f1": num(s.f1),
                "precision": opt(s.precision),
                "recall": opt(s.recall),
                "auc": opt(s.auc),
                "mae_watts": num(s.mae_watts),
                "intrinsic_error_watts": num(s.intrinsic_error_watts),
                "reconstructed_mae_watts": num(s.reconstructed_mae_watts),
                "regression_f1": num(s.regression_f1),
                "trained_on": {
                    "classification": format!("{cstem}.ckpt"),
                    "regression": format!("{rstem}.ckpt"),
                },
            }));
        }
    }
    let path = cfg.out.join("metrics.json");
    write_json(&path, &json!({"config_hash": cfg.hash(), "metrics": cells}))?;
    Ok(vec![path])
}

/// Seed of sweep repetition `r`; repetition 0 reuses the run seed so it
/// matches `train`.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        seed
    } else {
        derive_seed(seed, r as u64)
    }
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    let meters = load_meters(cfg)?;
    let method = cfg.method;
    let apps = prepare(cfg, &meters, &[method])?;
    let sets = apps
        .iter()
        .map(|a| samples(cfg, a, method))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for (ai, _) in apps.iter().enumerate() {
        for &w in &cfg.sweep_w {
            for r in 0..cfg.sweep_repetitions {
                jobs.push((ai, w, repetition_seed(cfg.seed, r)));
            }
        }
    }
    let rows = run_pool(&jobs, cfg.workers, |&(ai, w, seed)| {
        let app = &apps[ai];
        let model = train_one(cfg, &app.name, &sets[ai], w, seed)?.best;
        let s = score(cfg, app, method, &model, &model)?;
        // endpoints: w = 0 has no trained classifier, w = 1 no trained regressor
        let f1 = if w == 0.0 { s.regression_f1 } else { s.f1 };
        let mae = if w == 1.0 {
            s.reconstructed_mae_watts
        } else {
            s.mae_watts
        };
        Ok((app.name.clone(), w, seed, f1, mae))
    })?;
    let mut rows = rows;
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut csv = Csv::new(&["appliance", "w", "seed", "f1", "mae_watts"]);
    for (app, w, seed, f1, mae) in &rows {
        csv.row(&[
            app.clone(),
            fmt_w(*w),
            seed.to_string(),
            cell(*f1),
            cell(*mae),
        ]);
    }
    let path = cfg.out.join("sweep.csv");
    csv.write(&path)?;
    Ok(vec![path])
}
