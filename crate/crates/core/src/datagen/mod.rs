//! Datasets, group annotations, the synthetic spurious-correlation generator
//! and CSV ingestion.

mod csv_io;
mod synthetic;

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub use csv_io::{load_csv, read_csv, CsvSchema};
pub use synthetic::{generate_synthetic, reference_spec, SyntheticSpec, SyntheticSplits};

/// A group `(a, y)`: spurious attribute and label. Ordered by attribute, then
/// label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId {
    pub attribute: usize,
    pub label: usize,
}

impl GroupId {
    pub fn new(attribute: usize, label: usize) -> Self {
        Self { attribute, label }
    }

    /// `a == y`: the spurious correlation holds for this group.
    pub fn is_aligned(&self) -> bool {
        self.attribute == self.label
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(a={}, y={})", self.attribute, self.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
    pub group: Option<GroupId>,
}

impl Example {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self {
            features,
            label,
            group: None,
        }
    }

    pub fn with_attribute(features: Vec<f64>, label: usize, attribute: usize) -> Self {
        Self {
            features,
            label,
            group: Some(GroupId::new(attribute, label)),
        }
    }
}

/// An ordered collection of examples. The order is part of the value.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Result<Self> {
        if let Some(first) = examples.first() {
            let dim = first.features.len();
            for (i, ex) in examples.iter().enumerate() {
                if ex.features.len() != dim {
                    return Err(Error::invalid(format!(
                        "example {i} has {} features, expected {dim}",
                        ex.features.len()
                    )));
                }
                if let Some(g) = ex.group {
                    if g.label != ex.label {
                        return Err(Error::invalid(format!(
                            "example {i}: group label {} differs from example label {}",
                            g.label, ex.label
                        )));
                    }
                }
            }
        }
        Ok(Self {
            name: name.into(),
            examples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.features.len())
    }

    /// One more than the largest label, and at least 2.
    pub fn num_labels(&self) -> usize {
        self.examples.iter().map(|e| e.label + 1).max().unwrap_or(0).max(2)
    }

    /// True iff the dataset is non-empty and every example carries a group.
    pub fn has_group_annotations(&self) -> bool {
        !self.examples.is_empty() && self.examples.iter().all(|e| e.group.is_some())
    }

    /// Groups that occur, in `GroupId` order.
    pub fn groups(&self) -> Vec<GroupId> {
        self.examples
            .iter()
            .filter_map(|e| e.group)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn require_groups(&self, context: &str) -> Result<()> {
        if self.has_group_annotations() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{context} requires group annotations on dataset `{}`",
                self.name
            )))
        }
    }

    /// Examples at `indices`, in the order given.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Result<Dataset> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            let ex = self
                .examples
                .get(i)
                .ok_or_else(|| Error::invalid(format!("index {i} out of range ({})", self.len())))?;
            out.push(ex.clone());
        }
        Ok(Dataset {
            name: name.into(),
            examples: out,
        })
    }

    pub fn batch<'a>(&'a self, indices: &[usize]) -> Vec<(&'a [f64], usize)> {
        indices
            .iter()
            .map(|&i| (self.examples[i].features.as_slice(), self.examples[i].label))
            .collect()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub(crate) fn from_parts_unchecked(name: String, examples: Vec<Example>) -> Self {
        Self { name, examples }
    }
}

/// Removes every group annotation. Trainers that must not see training groups
/// receive this view.
pub fn strip_group_annotations(data: &Dataset) -> Dataset {
    let examples = data
        .examples
        .iter()
        .map(|e| Example {
            features: e.features.clone(),
            label: e.label,
            group: None,
        })
        .collect();
    Dataset {
        name: data.name.clone(),
        examples,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    pub dataset: Dataset,
    /// Groups of the input that have no example left.
    pub missing_groups: Vec<GroupId>,
}

impl Subsample {
    pub fn warnings(&self) -> Vec<String> {
        self.missing_groups
            .iter()
            .map(|g| {
                format!(
                    "group {g} absent from subsampled `{}`; worst-group accuracy covers represented groups only",
                    self.dataset.name
                )
            })
            .collect()
    }
}

/// Uniform sample without replacement of `floor(fraction * m)` examples
/// (at least one), kept in their original relative order.
pub fn subsample_validation(val: &Dataset, fraction: f64, seed: u64) -> Result<Subsample> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("fraction", format!("{fraction} is outside (0, 1]")));
    }
    val.require_groups("validation subsampling")?;
    let m = val.len();
    let k = ((fraction * m as f64 + 1e-9).floor() as usize).clamp(1, m);
    let mut picked = if k == m {
        (0..m).collect::<Vec<_>>()
    } else {
        let mut rng = stream(seed, Stream::Subsample);
        index::sample(&mut rng, m, k).into_vec()
    };
    picked.sort_unstable();
    let name = if k == m {
        val.name.clone()
    } else {
        format!("{}[{k}/{m}]", val.name)
    };
    let dataset = val.select(name, &picked)?;
    let present: BTreeSet<GroupId> = dataset.groups().into_iter().collect();
    let missing_groups = val
        .groups()
        .into_iter()
        .filter(|g| !present.contains(g))
        .collect();
    Ok(Subsample {
        dataset,
        missing_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annotated(n: usize, groups: &[GroupId]) -> Dataset {
        let examples = (0..n)
            .map(|i| {
                let g = groups[i % groups.len()];
                Example::with_attribute(vec![i as f64], g.label, g.attribute)
            })
            .collect();
        Dataset::new("val", examples).unwrap()
    }

    fn four_groups() -> Vec<GroupId> {
        vec![
            GroupId::new(0, 0),
            GroupId::new(0, 1),
            GroupId::new(1, 0),
            GroupId::new(1, 1),
        ]
    }

    #[test]
    fn group_label_must_match_example_label() {
        let bad = Example {
            features: vec![0.0],
            label: 0,
            group: Some(GroupId::new(0, 1)),
        };
        assert!(Dataset::new("x", vec![bad]).is_err());
    }

    #[test]
    fn strip_removes_groups_and_keeps_content() {
        let d = annotated(8, &four_groups());
        assert!(d.has_group_annotations());
        let s = strip_group_annotations(&d);
        assert!(!s.has_group_annotations());
        for (a, b) in d.examples().iter().zip(s.examples()) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.label, b.label);
        }
        assert_eq!(strip_group_annotations(&s), s);
        // join by index recovers the groups
        let rejoined: Vec<_> = s
            .examples()
            .iter()
            .enumerate()
            .map(|(i, e)| Example {
                group: d.examples()[i].group,
                ..e.clone()
            })
            .collect();
        assert_eq!(Dataset::new("val", rejoined).unwrap(), d);
    }

    #[test]
    fn full_fraction_is_identity() {
        let d = annotated(40, &four_groups());
        let s = subsample_validation(&d, 1.0, 9).unwrap();
        assert_eq!(s.dataset, d);
        assert!(s.missing_groups.is_empty());
    }

    #[test]
    fn tenth_of_waterbirds_sized_val() {
        let d = annotated(1199, &four_groups());
        assert_eq!(subsample_validation(&d, 0.1, 0).unwrap().dataset.len(), 119);
    }

    #[test]
    fn tiny_subsample_warns_about_missing_groups() {
        let d = annotated(40, &four_groups());
        let s = subsample_validation(&d, 1.0 / 20.0, 3).unwrap();
        assert_eq!(s.dataset.len(), 2);
        assert!(s.missing_groups.len() >= 2);
        assert_eq!(s.warnings().len(), s.missing_groups.len());
    }

    #[test]
    fn subsample_preserves_relative_order() {
        let d = annotated(100, &four_groups());
        for seed in 0..5 {
            let s = subsample_validation(&d, 0.3, seed).unwrap();
            let xs: Vec<f64> = s.dataset.examples().iter().map(|e| e.features[0]).collect();
            assert!(xs.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(xs.len(), 30);
        }
    }

    #[test]
    fn subsample_requires_annotations() {
        let d = strip_group_annotations(&annotated(10, &four_groups()));
        assert!(subsample_validation(&d, 0.5, 0).is_err());
        assert!(subsample_validation(&annotated(10, &four_groups()), 0.0, 0).is_err());
    }
}
