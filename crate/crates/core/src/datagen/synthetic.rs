use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Example, GroupId};
use crate::error::{Error, Result};
use crate::rng::{stream, ChaCha8Rng, Stream};

/// Parameters of the Gaussian spurious-correlation benchmark.
///
/// Binary label `y` and binary spurious attribute `a`. Each example has one
/// core coordinate centred at `±core_separation / 2` by `y`, one spurious
/// coordinate centred at `±spurious_separation / 2` by `a`, and `noise_dims`
/// centred noise coordinates; every coordinate has standard deviation
/// `noise_sigma`. In training data `a = y` with probability
/// `majority_fraction`; validation and test are balanced across the four
/// groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub majority_fraction: f64,
    pub label_balance: Vec<f64>,
    pub core_separation: f64,
    pub spurious_separation: f64,
    pub noise_dims: usize,
    pub noise_sigma: f64,
}

/// The fixed benchmark used by the acceptance suite and shipped configs.
pub fn reference_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_train: 3000,
        n_val: 600,
        n_test: 2000,
        majority_fraction: 0.95,
        label_balance: vec![0.5, 0.5],
        core_separation: 2.0,
        spurious_separation: 4.0,
        noise_dims: 8,
        noise_sigma: 1.0,
    }
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        reference_spec()
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.majority_fraction > 0.5 && self.majority_fraction < 1.0) {
            return Err(Error::config("majority_fraction", "must lie in (0.5, 1)"));
        }
        if self.label_balance.len() != 2 {
            return Err(Error::config("label_balance", "exactly two label proportions are required"));
        }
        let total: f64 = self.label_balance.iter().sum();
        if self.label_balance.iter().any(|p| !(p.is_finite() && *p > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("label_balance", "entries must be positive and sum to 1"));
        }
        for (field, v) in [
            ("core_separation", self.core_separation),
            ("spurious_separation", self.spurious_separation),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.n_train == 0 {
            return Err(Error::config("n_train", "must be positive"));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        2 + self.noise_dims
    }

    fn sample(&self, rng: &mut ChaCha8Rng, label: usize, attribute: usize) -> Example {
        let sign = |v: usize| if v == 1 { 1.0 } else { -1.0 };
        let mut features = Vec::with_capacity(self.feature_dim());
        let mut gauss = |mean: f64| mean + self.noise_sigma * rng.sample::<f64, _>(StandardNormal);
        features.push(gauss(sign(label) * self.core_separation / 2.0));
        features.push(gauss(sign(attribute) * self.spurious_separation / 2.0));
        for _ in 0..self.noise_dims {
            features.push(gauss(0.0));
        }
        Example::with_attribute(features, label, attribute)
    }

    fn balanced(&self, name: &str, n: usize, rng: &mut ChaCha8Rng) -> Dataset {
        let groups = [
            GroupId::new(0, 0),
            GroupId::new(0, 1),
            GroupId::new(1, 0),
            GroupId::new(1, 1),
        ];
        let per_group = n / groups.len();
        let kept = per_group * groups.len();
        let examples = (0..kept)
            .map(|i| {
                let g = groups[i % groups.len()];
                self.sample(rng, g.label, g.attribute)
            })
            .collect();
        let name = if kept == n {
            name.to_string()
        } else {
            format!("{name} (dropped {})", n - kept)
        };
        Dataset::from_parts_unchecked(name, examples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSplits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Deterministic per `(spec, seed)`. Each split draws from its own stream, so
/// resizing one split leaves the others unchanged.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticSplits> {
    spec.validate()?;
    let mut rng = stream(seed, Stream::SyntheticTrain);
    let train = (0..spec.n_train)
        .map(|_| {
            let label = usize::from(rng.random::<f64>() >= spec.label_balance[0]);
            let aligned = rng.random::<f64>() < spec.majority_fraction;
            let attribute = if aligned { label } else { 1 - label };
            spec.sample(&mut rng, label, attribute)
        })
        .collect();
    let train = Dataset::from_parts_unchecked("train".into(), train);
    let val = spec.balanced("val", spec.n_val, &mut stream(seed, Stream::SyntheticVal));
    let test = spec.balanced("test", spec.n_test, &mut stream(seed, Stream::SyntheticTest));
    Ok(SyntheticSplits { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn counts(d: &Dataset) -> BTreeMap<GroupId, usize> {
        let mut m = BTreeMap::new();
        for e in d.examples() {
            *m.entry(e.group.unwrap()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = reference_spec();
        assert_eq!(generate_synthetic(&spec, 5).unwrap(), generate_synthetic(&spec, 5).unwrap());
        assert_ne!(
            generate_synthetic(&spec, 5).unwrap().train,
            generate_synthetic(&spec, 6).unwrap().train
        );
    }

    #[test]
    fn minority_counts_within_binomial_bounds() {
        let spec = SyntheticSpec {
            n_train: 2000,
            ..reference_spec()
        };
        for seed in 0..5 {
            let c = counts(&generate_synthetic(&spec, seed).unwrap().train);
            for label in 0..2 {
                let minority = c.get(&GroupId::new(1 - label, label)).copied().unwrap_or(0) as f64;
                // 1000 per label on average, 5% minority: mean 50, sd ~ 7
                let sd = (2000.0f64 * 0.5 * 0.05 * (1.0 - 0.5 * 0.05)).sqrt();
                assert!((minority - 50.0).abs() < 4.0 * sd, "seed {seed}: {minority}");
            }
        }
    }

    #[test]
    fn evaluation_splits_are_group_balanced() {
        let spec = SyntheticSpec {
            n_val: 602,
            ..reference_spec()
        };
        let s = generate_synthetic(&spec, 1).unwrap();
        let c = counts(&s.val);
        assert_eq!(c.len(), 4);
        assert!(c.values().all(|&n| n == 150));
        assert!(s.val.name().contains("dropped 2"));
        assert!(counts(&s.test).values().all(|&n| n == 500));
        assert!(s.train.has_group_annotations() && s.val.has_group_annotations());
        assert_eq!(s.train.feature_dim(), 10);
    }

    #[test]
    fn large_sample_proportions_converge() {
        let spec = SyntheticSpec {
            n_train: 100_000,
            n_val: 0,
            n_test: 0,
            ..reference_spec()
        };
        let s = generate_synthetic(&spec, 11).unwrap();
        let c = counts(&s.train);
        for label in 0..2 {
            let aligned = c[&GroupId::new(label, label)] as f64;
            let flipped = c[&GroupId::new(1 - label, label)] as f64;
            let frac = aligned / (aligned + flipped);
            assert!((frac - 0.95).abs() < 0.01, "{frac}");
            assert!(((aligned + flipped) / 100_000.0 - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad = [
            SyntheticSpec { majority_fraction: 0.5, ..reference_spec() },
            SyntheticSpec { label_balance: vec![0.3, 0.3], ..reference_spec() },
            SyntheticSpec { label_balance: vec![1.0], ..reference_spec() },
            SyntheticSpec { noise_sigma: 0.0, ..reference_spec() },
        ];
        for spec in bad {
            assert!(generate_synthetic(&spec, 0).is_err());
        }
    }
}
