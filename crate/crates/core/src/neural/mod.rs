//! A small fixed-topology CNN written against plain slices: layers, loss,
//! Adam, training loop, gradient checks and weight files.

pub mod adam;
pub mod gradcheck;
pub mod io;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use io::{load_weights, save_weights, weights_from_bytes, weights_to_bytes};
pub use layers::{bce_logit_grad, bce_loss, dropout, relu, sigmoid, Conv2d, Dense};
pub use model::{ConvSpec, ForwardCache, Model, ModelConfig, ModelParams};
pub use tensor::{Scalar, Tensor};
pub use train::{evaluate, split_indices, train, EpochLog, Sample, SampleSource, TrainConfig, TrainReport, Trainer};
