//! Error-set and CVaR-set composition statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, GroupId};
use crate::error::{Error, Result};
use crate::trainers::ErrorSet;

/// How well an error set captures one target group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSetStats {
    pub target_group: GroupId,
    pub error_set_size: usize,
    pub target_count: usize,
    pub target_in_error_set: usize,
    /// Share of the error set that belongs to the target group.
    pub precision: f64,
    /// Share of the target group that is in the error set.
    pub recall: f64,
    /// Share of the training data that belongs to the target group.
    pub empirical_rate: f64,
    /// `precision / empirical_rate`.
    pub enrichment: f64,
    /// Set when the error set is empty and precision is reported as 0.
    pub empty_error_set: bool,
}

fn group_of(train: &Dataset, i: usize) -> Result<GroupId> {
    train
        .examples()
        .get(i)
        .ok_or_else(|| Error::invalid(format!("error-set index {i} out of range ({})", train.len())))?
        .group
        .ok_or_else(|| Error::invalid(format!("example {i} has no group annotation")))
}

pub fn error_set_stats(error_set: &ErrorSet, train: &Dataset, target: GroupId) -> Result<ErrorSetStats> {
    train.require_groups("error-set statistics")?;
    let n = train.len();
    let target_count = train.examples().iter().filter(|e| e.group == Some(target)).count();
    let mut hits = 0;
    for &i in error_set.indices() {
        if group_of(train, i)? == target {
            hits += 1;
        }
    }
    let size = error_set.len();
    let precision = if size > 0 { hits as f64 / size as f64 } else { 0.0 };
    let recall = if target_count > 0 {
        hits as f64 / target_count as f64
    } else {
        0.0
    };
    let empirical_rate = target_count as f64 / n as f64;
    let enrichment = if empirical_rate > 0.0 {
        precision / empirical_rate
    } else {
        0.0
    };
    Ok(ErrorSetStats {
        target_group: target,
        error_set_size: size,
        target_count,
        target_in_error_set: hits,
        precision,
        recall,
        empirical_rate,
        enrichment,
        empty_error_set: size == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRow {
    pub group: GroupId,
    pub count: usize,
    pub in_error_set: usize,
    /// Fraction of the error set from this group.
    pub share: f64,
    pub empirical_rate: f64,
    pub enrichment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentTable {
    /// Sorted by enrichment, highest first; ties by group order.
    pub rows: Vec<EnrichmentRow>,
    /// Combinations of observed attributes and labels with no training example.
    pub missing_groups: Vec<GroupId>,
}

pub fn enrichment_table(error_set: &ErrorSet, train: &Dataset) -> Result<EnrichmentTable> {
    train.require_groups("enrichment table")?;
    let n = train.len() as f64;
    let mut counts: BTreeMap<GroupId, usize> = BTreeMap::new();
    for e in train.examples() {
        *counts.entry(e.group.expect("annotated")).or_default() += 1;
    }
    let mut in_set: BTreeMap<GroupId, usize> = BTreeMap::new();
    for &i in error_set.indices() {
        *in_set.entry(group_of(train, i)?).or_default() += 1;
    }
    let size = error_set.len();
    let mut rows: Vec<EnrichmentRow> = counts
        .iter()
        .map(|(&group, &count)| {
            let k = in_set.get(&group).copied().unwrap_or(0);
            let share = if size > 0 { k as f64 / size as f64 } else { 0.0 };
            let empirical_rate = count as f64 / n;
            EnrichmentRow {
                group,
                count,
                in_error_set: k,
                share,
                empirical_rate,
                enrichment: share / empirical_rate,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.enrichment.total_cmp(&a.enrichment).then(a.group.cmp(&b.group)));

    let attributes: BTreeSet<usize> = counts.keys().map(|g| g.attribute).collect();
    let labels: BTreeSet<usize> = counts.keys().map(|g| g.label).collect();
    let missing_groups = attributes
        .iter()
        .flat_map(|&a| labels.iter().map(move |&y| GroupId::new(a, y)))
        .filter(|g| !counts.contains_key(g))
        .collect();
    Ok(EnrichmentTable { rows, missing_groups })
}

/// Indices of the `ceil(alpha * n)` largest losses; ties go to the lower index.
pub fn top_loss_set(losses: &[f64], alpha: f64) -> Result<Vec<usize>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config("alpha", format!("{alpha} is outside (0, 1]")));
    }
    let k = ((alpha * losses.len() as f64 - 1e-9).ceil() as usize).min(losses.len());
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    let mut top = order[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionPoint {
    pub snapshot: usize,
    pub set_size: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Worst-group precision and recall of the top-`alpha` loss set at every
/// snapshot.
pub fn track_cvar_composition(
    snapshots: &[Vec<f64>],
    alpha: f64,
    train: &Dataset,
    worst: GroupId,
) -> Result<Vec<CompositionPoint>> {
    snapshots
        .iter()
        .enumerate()
        .map(|(s, losses)| {
            if losses.len() != train.len() {
                return Err(Error::DimensionMismatch {
                    what: "loss snapshot",
                    expected: train.len(),
                    got: losses.len(),
                });
            }
            let set = ErrorSet::new(top_loss_set(losses, alpha)?, s);
            let stats = error_set_stats(&set, train, worst)?;
            Ok(CompositionPoint {
                snapshot: s,
                set_size: set.len(),
                precision: stats.precision,
                recall: stats.recall,
            })
        })
        .collect()
}
