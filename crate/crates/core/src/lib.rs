//! Group-robust training on small differentiable classifiers.
//!
//! The crate provides ERM, Just-Train-Twice (JTT) and its dynamic-error-set
//! variant, CVaR DRO, Learning from Failure, group DRO and an
//! upsample-minority baseline, together with a synthetic spurious-correlation
//! benchmark, per-group evaluation, error-set diagnostics and a grid-search
//! harness that selects on worst-group validation accuracy.

pub mod analysis;
pub mod datagen;
pub mod diffcore;
mod error;
pub mod exec;
pub mod rng;
pub mod trainers;
pub mod tuning;

pub use error::{Error, Result};
