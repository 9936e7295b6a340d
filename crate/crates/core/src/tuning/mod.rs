//! Grid sweeps, early stopping and validation-size studies.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analysis::{evaluate_groups, Criterion};
use crate::datagen::{subsample_validation, Dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::trainers::{train, Checkpoint, EpochRecord, TrainConfig};

/// A base configuration and the values to try for some of its fields.
///
/// Configurations are enumerated as a cartesian product with axes sorted by
/// field name; the first axis varies slowest and values keep their given
/// order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub base: TrainConfig,
    pub axes: BTreeMap<String, Vec<String>>,
}

impl Grid {
    pub fn single(base: TrainConfig) -> Self {
        Self {
            base,
            axes: BTreeMap::new(),
        }
    }

    pub fn axis(mut self, name: &str, values: &[&str]) -> Self {
        self.axes.insert(name.to_string(), values.iter().map(|v| v.to_string()).collect());
        self
    }

    pub fn configs(&self) -> Result<Vec<TrainConfig>> {
        let mut out = vec![self.base.clone()];
        for (name, values) in &self.axes {
            if values.is_empty() {
                return Err(Error::config(name.clone(), "grid axis has no values"));
            }
            let mut next = Vec::with_capacity(out.len() * values.len());
            for cfg in &out {
                for v in values {
                    let mut c = cfg.clone();
                    c.set_field(name, v)?;
                    next.push(c);
                }
            }
            out = next;
        }
        for c in &out {
            c.validate()?;
        }
        Ok(out)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut g = self.clone();
        g.base.seed = seed;
        g.axes.remove("seed");
        g
    }
}

/// Epoch with the highest criterion value; ties go to the earliest.
pub fn early_stop(history: &[EpochRecord], criterion: Criterion) -> Result<usize> {
    let score = |r: &EpochRecord| match criterion {
        Criterion::WorstGroup => r.val_worst_group,
        Criterion::Average => r.val_average,
    };
    let first = history.first().ok_or_else(|| Error::invalid("empty training history"))?;
    let mut best = (0, score(first));
    for (i, r) in history.iter().enumerate().skip(1) {
        if score(r) > best.1 {
            best = (i, score(r));
        }
    }
    Ok(best.0)
}

/// Metrics of the checkpoint selected by one early-stopping criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub epoch: usize,
    pub val_worst_group: f64,
    pub val_average: f64,
    pub test_worst_group: f64,
    pub test_average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub config: TrainConfig,
    /// Checkpoint early-stopped on validation worst-group accuracy.
    pub by_worst_group: RunMetrics,
    /// Checkpoint early-stopped on validation average accuracy.
    pub by_average: RunMetrics,
    pub warnings: Vec<String>,
}

impl SweepRow {
    pub fn metrics(&self, criterion: Criterion) -> &RunMetrics {
        match criterion {
            Criterion::WorstGroup => &self.by_worst_group,
            Criterion::Average => &self.by_average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub criterion: Criterion,
    pub rows: Vec<SweepRow>,
    /// Row maximizing validation worst-group accuracy (worst-group stopping).
    pub best_by_worst_group: usize,
    /// Row maximizing validation average accuracy (average stopping).
    pub best_by_average: usize,
}

impl SweepResult {
    pub fn best_index(&self, criterion: Criterion) -> usize {
        match criterion {
            Criterion::WorstGroup => self.best_by_worst_group,
            Criterion::Average => self.best_by_average,
        }
    }

    /// The winning row's metrics under `criterion`.
    pub fn best(&self, criterion: Criterion) -> &RunMetrics {
        self.rows[self.best_index(criterion)].metrics(criterion)
    }

    /// The winning row's metrics under the sweep's own criterion.
    pub fn selected(&self) -> &RunMetrics {
        self.best(self.criterion)
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map_or(0, |(i, _)| i)
}

fn run_metrics(cp: &Checkpoint, test: &Dataset) -> Result<RunMetrics> {
    let t = evaluate_groups(&cp.model, test)?;
    Ok(RunMetrics {
        epoch: cp.epoch,
        val_worst_group: cp.val.worst_group_accuracy,
        val_average: cp.val.average_accuracy,
        test_worst_group: t.worst_group_accuracy,
        test_average: t.average_accuracy,
    })
}

pub fn sweep_row(cfg: &TrainConfig, train_set: &Dataset, val: &Dataset, test: &Dataset) -> Result<SweepRow> {
    if cfg.epochs == 0 {
        return Err(Error::config("epochs", "sweeps need at least one epoch"));
    }
    let r = train(train_set, val, cfg)?;
    let wg = r.best.worst_group.as_ref().expect("at least one epoch");
    let avg = r.best.average.as_ref().expect("at least one epoch");
    Ok(SweepRow {
        config: cfg.clone(),
        by_worst_group: run_metrics(wg, test)?,
        by_average: run_metrics(avg, test)?,
        warnings: r.warnings,
    })
}

/// Trains every grid point with the default [`Execution`].
pub fn grid_sweep(grid: &Grid, train: &Dataset, val: &Dataset, test: &Dataset, criterion: Criterion) -> Result<SweepResult> {
    grid_sweep_with(grid, train, val, test, criterion, Execution::default())
}

pub fn grid_sweep_with(
    grid: &Grid,
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    criterion: Criterion,
    exec: Execution,
) -> Result<SweepResult> {
    val.require_groups("sweep validation")?;
    test.require_groups("sweep test")?;
    let configs = grid.configs()?;
    let rows = exec
        .map(&configs, |cfg| sweep_row(cfg, train, val, test))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        criterion,
        best_by_worst_group: argmax_first(rows.iter().map(|r| r.by_worst_group.val_worst_group)),
        best_by_average: argmax_first(rows.iter().map(|r| r.by_average.val_average)),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub fraction: f64,
    /// Size of the reduced validation set for each seed.
    pub val_sizes: Vec<usize>,
    /// Test worst-group accuracy of the selected configuration, per seed.
    pub test_worst_group: Vec<f64>,
    pub median_test_worst_group: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub sweeps: Vec<SweepResult>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

/// For each fraction and seed: subsample validation with that seed, sweep the
/// grid (base seed set to the same seed) against the reduced set, and record
/// the selected configuration's test worst-group accuracy on the full test
/// set.
#[allow(clippy::too_many_arguments)]
pub fn validation_size_study(
    fractions: &[f64],
    grid: &Grid,
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    seeds: &[u64],
    criterion: Criterion,
    exec: Execution,
) -> Result<Vec<StudyRow>> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let mut out = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let mut row = StudyRow {
            fraction,
            val_sizes: Vec::new(),
            test_worst_group: Vec::new(),
            median_test_worst_group: f64::NAN,
            warnings: Vec::new(),
            sweeps: Vec::new(),
        };
        for &seed in seeds {
            let sub = subsample_validation(val, fraction, seed)?;
            row.warnings.extend(sub.warnings());
            let sweep = grid_sweep_with(&grid.with_seed(seed), train, &sub.dataset, test, criterion, exec)?;
            row.val_sizes.push(sub.dataset.len());
            row.test_worst_group.push(sweep.selected().test_worst_group);
            row.sweeps.push(sweep);
        }
        row.median_test_worst_group = median(&row.test_worst_group);
        out.push(row);
    }
    Ok(out)
}
