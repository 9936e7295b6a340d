//! Trainers that may not read training groups are blind to them.

use grouprobust::datagen::{generate_synthetic, Dataset, Example, SyntheticSpec};
use grouprobust::trainers::{train, Algorithm, TrainConfig};

/// Same features and labels, attributes scrambled.
fn poisoned(data: &Dataset) -> Dataset {
    let examples = data
        .examples()
        .iter()
        .enumerate()
        .map(|(i, e)| Example::with_attribute(e.features.clone(), e.label, (i * 7 + e.label) % 3 % 2))
        .collect();
    Dataset::new(data.name(), examples).unwrap()
}

#[test]
fn annotation_blind_trainers_ignore_train_groups() {
    let spec = SyntheticSpec {
        n_train: 300,
        n_val: 80,
        n_test: 40,
        ..SyntheticSpec::default()
    };
    let s = generate_synthetic(&spec, 9).unwrap();
    let bad = poisoned(&s.train);
    assert_ne!(bad, s.train);
    for algorithm in [Algorithm::Erm, Algorithm::Jtt, Algorithm::JttDynamic, Algorithm::Cvar, Algorithm::Lff] {
        let cfg = TrainConfig {
            algorithm,
            epochs: 3,
            refresh_every: Some(1),
            ..TrainConfig::default()
        };
        let a = train(&s.train, &s.val, &cfg).unwrap();
        let b = train(&bad, &s.val, &cfg).unwrap();
        assert_eq!(a.model, b.model, "{algorithm}");
        assert_eq!(a.history, b.history, "{algorithm}");
    }
    for algorithm in [Algorithm::GroupDro, Algorithm::UpsampleMinority] {
        let cfg = TrainConfig {
            algorithm,
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = train(&s.train, &s.val, &cfg).unwrap();
        let b = train(&bad, &s.val, &cfg).unwrap();
        assert_ne!(a.model, b.model, "{algorithm} should use the annotations");
    }
}
