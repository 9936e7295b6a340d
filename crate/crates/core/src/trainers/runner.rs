//! The shared epoch/minibatch loop.
//!
//! Every trainer drives a [`Run`]: each epoch draws a fresh permutation of the
//! training indices from the run's shuffle stream and visits it in
//! `batch_size` chunks (the last chunk may be short). Before each step the
//! per-example cross-entropy losses of the current model are computed and
//! handed to the algorithm, which returns per-example weights for the
//! weighted cross-entropy gradient.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::analysis::{evaluate_groups, GroupMetrics};
use crate::datagen::Dataset;
use crate::diffcore::{grad, sgd_step, Architecture, LossSpec, Model, OptimizerState};
use crate::error::{Error, Result};
use crate::rng::{stream, ChaCha8Rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 0-based epoch index.
    pub epoch: usize,
    /// Mean pre-step cross-entropy over the examples visited this epoch.
    pub train_loss: f64,
    pub val_worst_group: f64,
    pub val_average: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub model: Model,
    pub val: GroupMetrics,
}

/// Best-so-far parameters under each selection criterion. A checkpoint is
/// replaced only on strict improvement, so ties keep the earliest epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BestCheckpoints {
    pub worst_group: Option<Checkpoint>,
    pub average: Option<Checkpoint>,
}

pub(crate) struct Run<'v> {
    val: &'v Dataset,
    pub(crate) model: Model,
    opt: OptimizerState,
    shuffle: ChaCha8Rng,
    pub(crate) history: Vec<EpochRecord>,
    pub(crate) best: BestCheckpoints,
}

/// Per-batch weighting rule: `(model, batch indices, batch, losses) -> weights`.
pub(crate) trait Weigher: FnMut(&Model, &[usize], &[(&[f64], usize)], &[f64]) -> Result<Vec<f64>> {}
impl<F: FnMut(&Model, &[usize], &[(&[f64], usize)], &[f64]) -> Result<Vec<f64>>> Weigher for F {}

pub(crate) fn mean_weights(b: usize) -> Vec<f64> {
    vec![1.0 / b as f64; b]
}

pub(crate) fn architecture(train: &Dataset, hidden: &[usize]) -> Architecture {
    Architecture::mlp(train.feature_dim(), hidden.to_vec(), train.num_labels())
}

impl<'v> Run<'v> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        arch: Architecture,
        val: &'v Dataset,
        learning_rate: f64,
        momentum: f64,
        l2: f64,
        seed: u64,
        init: Stream,
        shuffle: Stream,
    ) -> Result<Self> {
        val.require_groups("validation during training")?;
        let model = Model::init(arch, &mut stream(seed, init))?;
        let opt = OptimizerState::new(learning_rate, momentum, l2, model.params().len())?;
        Ok(Self {
            val,
            model,
            opt,
            shuffle: stream(seed, shuffle),
            history: Vec::new(),
            best: BestCheckpoints::default(),
        })
    }

    /// One pass over `data`; returns the mean pre-step training loss.
    pub(crate) fn train_epoch(&mut self, data: &Dataset, batch_size: usize, weigh: &mut impl Weigher) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.shuffle);
        let mut total = 0.0;
        for idx in order.chunks(batch_size) {
            let batch = data.batch(idx);
            let losses = batch
                .iter()
                .map(|&(x, y)| self.model.loss(x, y, LossSpec::CrossEntropy))
                .collect::<Result<Vec<_>>>()?;
            total += losses.iter().sum::<f64>();
            let weights = weigh(&self.model, idx, &batch, &losses)?;
            let g = grad(&self.model, &batch, &weights, LossSpec::CrossEntropy)?;
            sgd_step(&mut self.model, &g, &mut self.opt)?;
        }
        Ok(total / data.len() as f64)
    }

    /// Evaluates on validation, appends to the history and updates the best
    /// checkpoints.
    pub(crate) fn end_epoch(&mut self, train_loss: f64) -> Result<()> {
        let val = evaluate_groups(&self.model, self.val)?;
        let epoch = self.history.len();
        self.history.push(EpochRecord {
            epoch,
            train_loss,
            val_worst_group: val.worst_group_accuracy,
            val_average: val.average_accuracy,
        });
        let improves = |slot: &Option<Checkpoint>, score: fn(&GroupMetrics) -> f64| {
            slot.as_ref().is_none_or(|c| score(&val) > score(&c.val))
        };
        if improves(&self.best.worst_group, |m| m.worst_group_accuracy) {
            self.best.worst_group = Some(Checkpoint {
                epoch,
                model: self.model.clone(),
                val: val.clone(),
            });
        }
        if improves(&self.best.average, |m| m.average_accuracy) {
            self.best.average = Some(Checkpoint {
                epoch,
                model: self.model.clone(),
                val,
            });
        }
        Ok(())
    }

    pub(crate) fn run_epochs(
        &mut self,
        data: &Dataset,
        epochs: usize,
        batch_size: usize,
        weigh: &mut impl Weigher,
    ) -> Result<()> {
        for _ in 0..epochs {
            let loss = self.train_epoch(data, batch_size, weigh)?;
            self.end_epoch(loss)?;
        }
        Ok(())
    }
}
