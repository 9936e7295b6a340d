use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, GroupId};
use crate::diffcore::Model;
use crate::error::{Error, Result};

/// Which validation statistic drives early stopping and model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    #[default]
    WorstGroup,
    Average,
}

impl Criterion {
    pub fn score(&self, metrics: &GroupMetrics) -> f64 {
        match self {
            Criterion::WorstGroup => metrics.worst_group_accuracy,
            Criterion::Average => metrics.average_accuracy,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::WorstGroup => "worst-group",
            Criterion::Average => "average",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst-group" => Ok(Criterion::WorstGroup),
            "average" => Ok(Criterion::Average),
            other => Err(Error::config(
                "criterion",
                format!("`{other}` is not one of worst-group, average"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Per-group zero-one accuracy with the worst group singled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    #[serde(with = "group_map")]
    pub per_group: BTreeMap<GroupId, GroupStat>,
    pub average_accuracy: f64,
    pub worst_group_accuracy: f64,
    pub worst_group: GroupId,
}

impl GroupMetrics {
    /// Builds metrics from `(group, count, correct)` triples. Groups with no
    /// examples are left out.
    pub fn from_counts(counts: impl IntoIterator<Item = (GroupId, usize, usize)>) -> Result<Self> {
        let mut per_group = BTreeMap::new();
        for (g, count, correct) in counts {
            if correct > count {
                return Err(Error::invalid(format!("group {g}: {correct} correct out of {count}")));
            }
            if count == 0 {
                continue;
            }
            let entry = per_group.entry(g).or_insert(GroupStat {
                count: 0,
                correct: 0,
                accuracy: 0.0,
            });
            entry.count += count;
            entry.correct += correct;
        }
        if per_group.is_empty() {
            return Err(Error::invalid("no annotated examples to evaluate"));
        }
        for stat in per_group.values_mut() {
            stat.accuracy = stat.correct as f64 / stat.count as f64;
        }
        let total: usize = per_group.values().map(|s| s.count).sum();
        let correct: usize = per_group.values().map(|s| s.correct).sum();
        // strict comparison in BTreeMap order keeps the smallest GroupId on ties
        let (worst_group, worst) = per_group
            .iter()
            .fold(None::<(GroupId, f64)>, |acc, (g, s)| match acc {
                Some((_, best)) if best <= s.accuracy => acc,
                _ => Some((*g, s.accuracy)),
            })
            .expect("non-empty");
        Ok(Self {
            per_group,
            average_accuracy: correct as f64 / total as f64,
            worst_group_accuracy: worst,
            worst_group,
        })
    }
}

pub fn predictions(model: &Model, data: &Dataset) -> Result<Vec<usize>> {
    data.examples().iter().map(|e| model.predict(&e.features)).collect()
}

/// Worst-group and average zero-one accuracy of `model` on annotated `data`.
pub fn evaluate_groups(model: &Model, data: &Dataset) -> Result<GroupMetrics> {
    data.require_groups("group evaluation")?;
    let mut counts: BTreeMap<GroupId, (usize, usize)> = BTreeMap::new();
    for e in data.examples() {
        let hit = model.predict(&e.features)? == e.label;
        let c = counts.entry(e.group.expect("annotated")).or_default();
        c.0 += 1;
        c.1 += usize::from(hit);
    }
    GroupMetrics::from_counts(counts.into_iter().map(|(g, (n, k))| (g, n, k)))
}

mod group_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::GroupStat;
    use crate::datagen::GroupId;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        attribute: usize,
        label: usize,
        #[serde(flatten)]
        stat: GroupStat,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<GroupId, GroupStat>, s: S) -> Result<S::Ok, S::Error> {
        map.iter()
            .map(|(g, stat)| Entry {
                attribute: g.attribute,
                label: g.label,
                stat: *stat,
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<GroupId, GroupStat>, D::Error> {
        Ok(Vec::<Entry>::deserialize(d)?
            .into_iter()
            .map(|e| (GroupId::new(e.attribute, e.label), e.stat))
            .collect())
    }
}
