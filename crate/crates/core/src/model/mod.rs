//! Dual-head convolutional disaggregator, losses, optimizer and training loop.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod net;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamConfig, DEFAULT_LEARNING_RATE};
pub use loss::{
    loss_and_output_grads, loss_classification, loss_regression, loss_total, LossParts,
    LossWeights, Targets, DEFAULT_LOSS_K,
};
pub use net::{
    Architecture, ForwardCache, Gradients, LayerKind, LayerSpec, Mode, ModelParams, NamedArray,
    Output,
};
pub use tensor::Tensor;
pub use train::{
    evaluate, loss_and_gradients, predict, samples_from, train, train_step, EpochRecord, Sample,
    TrainConfig, TrainOutcome,
};
