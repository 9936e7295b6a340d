use super::Model;
use crate::error::{Error, Result};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub velocity: Vec<f64>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, momentum: f64, l2: f64, num_params: usize) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        if !(l2.is_finite() && l2 >= 0.0) {
            return Err(Error::config("l2", "must be non-negative"));
        }
        Ok(Self {
            learning_rate,
            momentum,
            l2,
            velocity: vec![0.0; num_params],
        })
    }
}

/// `v <- momentum * v + (grad + l2 * params)`, then `params <- params - lr * v`.
pub fn sgd_step(model: &mut Model, grad: &[f64], opt: &mut OptimizerState) -> Result<()> {
    let n = model.params().len();
    if grad.len() != n {
        return Err(Error::DimensionMismatch {
            what: "gradient",
            expected: n,
            got: grad.len(),
        });
    }
    if opt.velocity.len() != n {
        return Err(Error::DimensionMismatch {
            what: "velocity",
            expected: n,
            got: opt.velocity.len(),
        });
    }
    let params = model.params_mut();
    for ((p, v), g) in params.iter_mut().zip(opt.velocity.iter_mut()).zip(grad) {
        *v = opt.momentum * *v + (g + opt.l2 * *p);
        *p -= opt.learning_rate * *v;
    }
    Ok(())
}
