//! Models, local training, evaluation and the parameter-space distance.

mod dataset;
mod model;
mod params;
mod train;

pub use dataset::Dataset;
pub use model::{evaluate, init_model, loss_and_grad, Evaluation, ModelKind, ModelSpec};
pub use params::{l1_distance, ParameterVector};
pub use train::{local_update, BatchSize, Hyperparams};
