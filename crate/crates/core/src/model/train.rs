//! Mini-batch training with per-epoch validation and best-snapshot selection.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig};
use super::loss::{loss_and_output_grads, LossParts, LossWeights, Targets};
use super::net::{Mode, ModelParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::ingestion::Dataset;
use crate::metrics::{confusion, f1_per_series, predicted_status};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;
use crate::series::{WindowKind, OUTPUT_LEN};

/// One training point with both targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    /// Normalized aggregate, 510 samples.
    pub input: Vec<T>,
    /// Normalized appliance power, 480 samples.
    pub power: Vec<T>,
    /// Binary status, 480 samples.
    pub status: Vec<T>,
}

/// Pairs normalized regression windows with the classification windows
/// that cover the same span.
pub fn samples_from<T: Scalar>(
    regression: &Dataset<T>,
    classification: &Dataset<T>,
) -> Result<Vec<Sample<T>>> {
    if regression.len() != classification.len() {
        return Err(Error::input(
            "regression and classification datasets differ in size",
        ));
    }
    regression
        .pairs
        .iter()
        .zip(&classification.pairs)
        .map(|(r, c)| {
            if r.kind != WindowKind::Regression
                || c.kind != WindowKind::Classification
                || r.start != c.start
            {
                return Err(Error::input(format!(
                    "misaligned window pair at start {}",
                    r.start
                )));
            }
            Ok(Sample {
                input: r.input.clone(),
                power: r.target.clone(),
                status: c.target.clone(),
            })
        })
        .collect()
}

fn batch_tensors<T: Scalar>(batch: &[&Sample<T>]) -> Result<(Tensor<T>, Targets<T>)> {
    let x = Tensor::from_rows(&batch.iter().map(|s| s.input.as_slice()).collect::<Vec<_>>())?;
    let power = Tensor::from_rows(&batch.iter().map(|s| s.power.as_slice()).collect::<Vec<_>>())?;
    let status = Tensor::from_rows(
        &batch
            .iter()
            .map(|s| s.status.as_slice())
            .collect::<Vec<_>>(),
    )?;
    if power.len != OUTPUT_LEN || status.len != OUTPUT_LEN {
        return Err(Error::input("targets must have 480 samples"));
    }
    Ok((x, Targets { power, status }))
}

/// Loss and parameter gradients for one batch in the given mode; returns the
/// forward cache so the caller can fold batch statistics.
pub fn loss_and_gradients<T: Scalar>(
    params: &ModelParams<T>,
    batch: &[&Sample<T>],
    weights: LossWeights,
    mode: Mode,
) -> Result<(
    LossParts<T>,
    super::net::Gradients<T>,
    super::net::ForwardCache<T>,
)> {
    let (x, targets) = batch_tensors(batch)?;
    let (out, cache) = params.forward(&x, mode)?;
    let (loss, d_status, d_power) = loss_and_output_grads(&out, &targets, weights);
    if !loss.total.is_finite() {
        return Err(Error::numerical("loss", "non-finite loss"));
    }
    let grads = params.backward(&cache, &d_status, &d_power)?;
    Ok((loss, grads, cache))
}

/// One optimizer step on a batch (Train-mode batch norm).
pub fn train_step<T: Scalar>(
    params: &mut ModelParams<T>,
    batch: &[&Sample<T>],
    weights: LossWeights,
    adam: &AdamConfig,
) -> Result<LossParts<T>> {
    let (loss, grads, cache) = loss_and_gradients(params, batch, weights, Mode::Train)?;
    params.update_running_stats(&cache);
    adam_step(params, &grads, adam);
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub weights: LossWeights,
    /// Seed of the per-epoch shuffle.
    pub seed: u64,
    /// Watts per unit of normalized power, for validation MAE.
    pub reference_watts: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        LossWeights::new(self.weights.w, self.weights.k)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
    pub val_mae_watts: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub best: ModelParams<T>,
    /// Epoch of the returned snapshot; 0 means the initialization.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Eval-mode predictions: (ON probability, normalized power) per input.
pub fn predict<T: Scalar>(
    params: &ModelParams<T>,
    inputs: &[&[T]],
    batch_size: usize,
) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch_size.max(1)) {
        let x = Tensor::from_rows(chunk)?;
        let (o, _) = params.forward(&x, Mode::Eval)?;
        for b in 0..chunk.len() {
            out.push((o.prob_on(b).to_vec(), o.power(b).to_vec()));
        }
    }
    Ok(out)
}

/// Eval-mode total loss, per-series F1 and power MAE (watts) over a sample set.
pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    samples: &[Sample<T>],
    weights: LossWeights,
    batch_size: usize,
    reference_watts: f64,
) -> Result<(f64, f64, f64)> {
    if samples.is_empty() {
        return Err(Error::input("evaluation set is empty"));
    }
    let mut loss_sum = 0.0;
    let mut confusions = Vec::with_capacity(samples.len());
    let mut abs_err = 0.0;
    let mut count = 0usize;
    let refs: Vec<&Sample<T>> = samples.iter().collect();
    for chunk in refs.chunks(batch_size.max(1)) {
        let (x, targets) = batch_tensors(chunk)?;
        let (out, _) = params.forward(&x, Mode::Eval)?;
        let (loss, _, _) = loss_and_output_grads(&out, &targets, weights);
        loss_sum += loss.total.as_f64() * chunk.len() as f64;
        for (b, s) in chunk.iter().enumerate() {
            let pred = predicted_status(out.prob_on(b));
            let truth: Vec<u8> = s
                .status
                .iter()
                .map(|&v| u8::from(v >= T::lit(0.5)))
                .collect();
            confusions.push(confusion(&pred, &truth)?);
            for (&p, &y) in out.power(b).iter().zip(&s.power) {
                abs_err += (p - y).abs().as_f64();
            }
            count += s.power.len();
        }
    }
    Ok((
        loss_sum / samples.len() as f64,
        f1_per_series(&confusions)?,
        reference_watts * abs_err / count as f64,
    ))
}

/// Trains from `init`, keeping the snapshot with the lowest validation loss
/// (training loss when no validation samples are given).
pub fn train<T: Scalar>(
    init: ModelParams<T>,
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    if val_set.is_empty() {
        log::warn!("validation set is empty; selecting snapshots on training loss");
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut params = init;
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_loss = f64::INFINITY;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample<T>> = idx.iter().map(|&i| &train_set[i]).collect();
            let loss = train_step(&mut params, &batch, cfg.weights, &cfg.adam)?;
            loss_sum += loss.total.as_f64() * batch.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_loss, val_f1, val_mae_watts) = if val_set.is_empty() {
            (train_loss, f64::NAN, f64::NAN)
        } else {
            evaluate(
                &params,
                val_set,
                cfg.weights,
                cfg.batch_size,
                cfg.reference_watts,
            )?
        };
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} f1 {val_f1:.4} mae {val_mae_watts:.2} W");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_f1,
            val_mae_watts,
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best = params.clone();
        }
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        history,
    })
}
