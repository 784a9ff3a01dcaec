//! Non-intrusive load monitoring toolkit: turns appliance power series into
//! ON/OFF classification problems by three thresholding methods, measures
//! how faithfully each status series reconstructs the power signal, and
//! trains a dual-head convolutional disaggregator on the resulting targets.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common case.

pub mod error;
pub mod ingestion;
pub mod metrics;
pub mod model;
pub mod reconstruction;
pub mod rng;
pub mod scalar;
pub mod series;
pub mod synth;
pub mod thresholding;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PowerSeriesF64 = series::PowerSeries<f64>;
pub type PowerSeriesF32 = series::PowerSeries<f32>;
pub type WindowPairF64 = series::WindowPair<f64>;
pub type DatasetF64 = ingestion::Dataset<f64>;
pub type ClusterSummaryF64 = thresholding::ClusterSummary<f64>;
pub type ThresholdSpecF64 = thresholding::ThresholdSpec<f64>;
pub type OnOffLevelsF64 = reconstruction::OnOffLevels<f64>;
pub type ModelParamsF64 = model::ModelParams<f64>;
pub type ModelParamsF32 = model::ModelParams<f32>;
pub type SampleF64 = model::Sample<f64>;
pub type HouseholdF64 = synth::Household<f64>;
