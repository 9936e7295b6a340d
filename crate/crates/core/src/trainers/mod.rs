//! Training algorithms.
//!
//! All trainers share one epoch loop (see [`runner`](self)) and the seeding
//! layout in [`crate::rng`]. Only group DRO and upsample-minority read
//! training group annotations; every other trainer strips them first.

mod algorithms;
mod config;
mod jtt;
mod runner;

use crate::datagen::{Dataset, GroupId};
use crate::diffcore::Model;
use crate::error::Result;

pub use algorithms::{
    cvar_batch_weights, group_dro_update, lff_weight, train_cvar, train_erm, train_group_dro, train_lff,
    train_lff_weighted,
};
pub use config::{Algorithm, TrainConfig};
pub use jtt::{
    build_upsampled, compute_error_set, identify, train_jtt, train_jtt_dynamic, train_upsample_minority,
    train_with_error_set, ErrorSet, IdentificationStage,
};
pub use runner::{BestCheckpoints, Checkpoint, EpochRecord};

/// Algorithm-specific outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Aux {
    None,
    Jtt {
        identification: Model,
        identification_history: Vec<EpochRecord>,
        error_set: ErrorSet,
        /// Error sets installed by dynamic refreshes, in order.
        refreshes: Vec<ErrorSet>,
    },
    /// Per-epoch cross-entropy of every training example, when tracking is on.
    Cvar { snapshots: Vec<Vec<f64>> },
    Lff { biased: Model },
    GroupDro { groups: Vec<GroupId>, weights: Vec<f64> },
    UpsampleMinority { minority: ErrorSet },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Parameters after the last epoch.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best: BestCheckpoints,
    pub aux: Aux,
    pub warnings: Vec<String>,
}

impl TrainResult {
    /// The error set of a JTT run.
    pub fn error_set(&self) -> Option<&ErrorSet> {
        match &self.aux {
            Aux::Jtt { error_set, .. } => Some(error_set),
            _ => None,
        }
    }
}

/// Dispatches on `cfg.algorithm`.
pub fn train(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    match cfg.algorithm {
        Algorithm::Erm => train_erm(train, val, cfg),
        Algorithm::Jtt => train_jtt(train, val, cfg),
        Algorithm::JttDynamic => train_jtt_dynamic(train, val, cfg),
        Algorithm::Cvar => train_cvar(train, val, cfg),
        Algorithm::Lff => train_lff(train, val, cfg),
        Algorithm::GroupDro => train_group_dro(train, val, cfg),
        Algorithm::UpsampleMinority => train_upsample_minority(train, val, cfg),
    }
}
