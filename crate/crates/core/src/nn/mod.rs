//! Fully connected ReLU regression networks.

mod gates;
mod network;
mod train;

pub use gates::{build_fdemo, build_fmult, build_fsq};
pub use network::{mlp_gradient, mlp_init, truncate, Gradient, Layer, MlpNetwork, Normalization};
pub use train::{loss_improvement, train, LossTrace, Optimizer, TrainingConfig};
