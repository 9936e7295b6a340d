//! Differentiable model core: small fully connected classifiers, their losses,
//! hand-derived gradients and SGD with momentum.

mod loss;
mod model;
mod optim;

pub use loss::{loss, LossSpec, PROB_FLOOR};
pub use model::{argmax, grad, Activation, Architecture, Model};
pub use optim::{sgd_step, OptimizerState};
