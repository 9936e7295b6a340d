//! Just Train Twice, its dynamic-error-set variant, and the upsample-minority
//! baseline that shares its upsampling path.

use serde::Serialize;

use crate::datagen::{strip_group_annotations, Dataset, Example};
use crate::diffcore::Model;
use crate::error::{Error, Result};
use crate::rng::Stream;

use super::algorithms::{finish, primary_run};
use super::runner::{architecture, mean_weights, EpochRecord, Run};
use super::{Aux, TrainConfig, TrainResult};

/// Training examples singled out for upsampling, as sorted unique indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorSet {
    indices: Vec<usize>,
    source_epoch: usize,
}

impl ErrorSet {
    pub fn new(mut indices: Vec<usize>, source_epoch: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices, source_epoch }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Epoch count of the model whose mistakes define the set.
    pub fn source_epoch(&self) -> usize {
        self.source_epoch
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// Indices whose argmax prediction differs from the label. The returned set
/// has `source_epoch` 0; pass the real value to [`ErrorSet::new`] if needed.
pub fn compute_error_set(model: &Model, train: &Dataset) -> Result<ErrorSet> {
    let mut wrong = Vec::new();
    for (i, e) in train.examples().iter().enumerate() {
        if model.predict(&e.features)? != e.label {
            wrong.push(i);
        }
    }
    Ok(ErrorSet::new(wrong, 0))
}

/// The original examples in order, then `lambda_up - 1` copies of the
/// error-set examples in index order.
pub fn build_upsampled(train: &Dataset, error_set: &ErrorSet, lambda_up: usize) -> Result<Dataset> {
    if lambda_up == 0 {
        return Err(Error::config("lambda_up", "must be at least 1"));
    }
    if let Some(&i) = error_set.indices().last().filter(|&&i| i >= train.len()) {
        return Err(Error::invalid(format!("error-set index {i} out of range")));
    }
    if lambda_up == 1 || error_set.is_empty() {
        return Ok(train.clone());
    }
    let mut examples: Vec<Example> = train.examples().to_vec();
    examples.reserve((lambda_up - 1) * error_set.len());
    for _ in 1..lambda_up {
        examples.extend(error_set.indices().iter().map(|&i| train.examples()[i].clone()));
    }
    Dataset::new(format!("{}+up{}x{}", train.name(), error_set.len(), lambda_up), examples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationStage {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub error_set: ErrorSet,
}

/// JTT stage one: ERM for `T` epochs on the identification streams, then the
/// error set of the resulting model.
pub fn identify(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<IdentificationStage> {
    cfg.validate()?;
    let train = strip_group_annotations(train);
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut run = Run::new(
        architecture(&train, &cfg.hidden),
        val,
        cfg.identification_learning_rate.unwrap_or(cfg.learning_rate),
        cfg.momentum,
        cfg.identification_l2.unwrap_or(cfg.l2),
        cfg.seed,
        Stream::IdentificationInit,
        Stream::IdentificationShuffle,
    )?;
    run.run_epochs(&train, cfg.identification_epochs, cfg.batch_size, &mut |_: &Model,
                                                                              _: &[usize],
                                                                              b: &[(&[f64], usize)],
                                                                              _: &[f64]| {
        Ok(mean_weights(b.len()))
    })?;
    let error_set = ErrorSet::new(
        compute_error_set(&run.model, &train)?.indices,
        cfg.identification_epochs,
    );
    Ok(IdentificationStage {
        model: run.model,
        history: run.history,
        error_set,
    })
}

fn empty_set_warning() -> String {
    "error set is empty; stage two reduces to ERM".to_string()
}

/// Stage two alone: ERM on `train` with `error_set` upsampled `lambda_up`
/// times, from the primary streams. Used directly by error-set ablations.
pub fn train_with_error_set(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    error_set: &ErrorSet,
) -> Result<TrainResult> {
    let train = strip_group_annotations(train);
    let upsampled = build_upsampled(&train, error_set, cfg.lambda_up)?;
    let mut run = primary_run(&upsampled, val, cfg)?;
    run.run_epochs(&upsampled, cfg.epochs, cfg.batch_size, &mut |_: &Model,
                                                                 _: &[usize],
                                                                 b: &[(&[f64], usize)],
                                                                 _: &[f64]| {
        Ok(mean_weights(b.len()))
    })?;
    let warnings = if error_set.is_empty() {
        vec![empty_set_warning()]
    } else {
        Vec::new()
    };
    Ok(finish(run, Aux::None, warnings))
}

pub fn train_jtt(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    let stage1 = identify(train, val, cfg)?;
    let mut result = train_with_error_set(train, val, cfg, &stage1.error_set)?;
    result.aux = Aux::Jtt {
        identification: stage1.model,
        identification_history: stage1.history,
        error_set: stage1.error_set,
        refreshes: Vec::new(),
    };
    Ok(result)
}

/// JTT whose error set is recomputed from the current final model after
/// every `K` stage-two epochs (never after the last one). `K = None`
/// reproduces [`train_jtt`].
pub fn train_jtt_dynamic(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    let stage1 = identify(train, val, cfg)?;
    let train = strip_group_annotations(train);
    let mut warnings = Vec::new();
    if stage1.error_set.is_empty() {
        warnings.push(empty_set_warning());
    }
    let mut data = build_upsampled(&train, &stage1.error_set, cfg.lambda_up)?;
    let mut run = primary_run(&data, val, cfg)?;
    let mut refreshes = Vec::new();
    let mut weigh = |_: &Model, _: &[usize], b: &[(&[f64], usize)], _: &[f64]| Ok(mean_weights(b.len()));
    for epoch in 0..cfg.epochs {
        let loss = run.train_epoch(&data, cfg.batch_size, &mut weigh)?;
        run.end_epoch(loss)?;
        let done = epoch + 1;
        if let Some(k) = cfg.refresh_every {
            if done % k == 0 && done < cfg.epochs {
                let e = ErrorSet::new(compute_error_set(&run.model, &train)?.indices, done);
                if e.is_empty() {
                    warnings.push(format!("refreshed error set after epoch {done} is empty"));
                }
                data = build_upsampled(&train, &e, cfg.lambda_up)?;
                refreshes.push(e);
            }
        }
    }
    let aux = Aux::Jtt {
        identification: stage1.model,
        identification_history: stage1.history,
        error_set: stage1.error_set,
        refreshes,
    };
    Ok(finish(run, aux, warnings))
}

/// ERM with every `y != a` example upsampled `lambda_up` times, using the
/// training group annotations. Binary attributes and labels only.
pub fn train_upsample_minority(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    train.require_groups("upsample-minority")?;
    if train.groups().iter().any(|g| g.attribute > 1 || g.label > 1) {
        return Err(Error::Unsupported(
            "upsample-minority needs binary attributes and labels".into(),
        ));
    }
    let minority = ErrorSet::new(
        train
            .examples()
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.group.expect("annotated").is_aligned())
            .map(|(i, _)| i)
            .collect(),
        0,
    );
    let mut result = train_with_error_set(train, val, cfg, &minority)?;
    result.warnings.clear();
    result.aux = Aux::UpsampleMinority { minority };
    Ok(result)
}
