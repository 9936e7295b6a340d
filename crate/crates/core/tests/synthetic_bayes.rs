//! Monte Carlo checks of the synthetic generator against closed forms.

use grouprobust::datagen::{generate_synthetic, reference_spec, GroupId, SyntheticSpec};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

fn big_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_train: 20_000,
        n_val: 400,
        n_test: 20_000,
        ..reference_spec()
    }
}

/// Accuracy of thresholding one coordinate at zero, on a balanced split, is
/// `Phi(separation / (2 sigma))`.
#[test]
fn single_coordinate_rules_match_bayes_rates() {
    let spec = big_spec();
    let s = generate_synthetic(&spec, 11).unwrap();
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let n = s.test.len() as f64;
    for (coord, sep, attr) in [(0, spec.core_separation, false), (1, spec.spurious_separation, true)] {
        let expected = std_normal.cdf(sep / (2.0 * spec.noise_sigma));
        let hits = s
            .test
            .examples()
            .iter()
            .filter(|e| {
                let target = if attr { e.group.unwrap().attribute } else { e.label };
                (e.features[coord] > 0.0) == (target == 1)
            })
            .count() as f64;
        let se = (expected * (1.0 - expected) / n).sqrt();
        assert!(
            (hits / n - expected).abs() < 4.0 * se,
            "coordinate {coord}: {} vs {expected}",
            hits / n
        );
    }
}

#[test]
fn minority_count_is_binomial() {
    let spec = big_spec();
    let s = generate_synthetic(&spec, 5).unwrap();
    let minority = s.train.examples().iter().filter(|e| !e.group.unwrap().is_aligned()).count() as u64;
    let dist = Binomial::new(1.0 - spec.majority_fraction, spec.n_train as u64).unwrap();
    let p_low = dist.cdf(minority);
    assert!(p_low > 1e-4 && p_low < 1.0 - 1e-4, "minority count {minority} in a tail (cdf {p_low})");
}

#[test]
fn noise_coordinates_are_standardized() {
    let spec = big_spec();
    let s = generate_synthetic(&spec, 2).unwrap();
    let xs: Vec<f64> = s.train.examples().iter().map(|e| e.features[2]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 4.0 / n.sqrt());
    assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
    let groups = s.test.groups();
    assert_eq!(groups.len(), 4);
    assert!(groups.contains(&GroupId::new(0, 1)));
}
