//! Configurations that collapse to ERM reproduce its trajectory bit for bit.

use grouprobust::datagen::{generate_synthetic, Dataset, GroupId, SyntheticSpec};
use grouprobust::trainers::{train, Algorithm, TrainConfig, TrainResult};
use proptest::prelude::*;

fn small(seed: u64) -> (Dataset, Dataset) {
    let spec = SyntheticSpec {
        n_train: 300,
        n_val: 80,
        n_test: 40,
        ..SyntheticSpec::default()
    };
    let s = generate_synthetic(&spec, seed).unwrap();
    (s.train, s.val)
}

fn same(a: &TrainResult, b: &TrainResult) -> bool {
    a.model == b.model && a.history == b.history && a.best == b.best
}

fn config(seed: u64, batch_size: usize, hidden: &str, momentum: f64) -> TrainConfig {
    let mut c = TrainConfig {
        epochs: 3,
        batch_size,
        seed,
        momentum,
        l2: 1e-3,
        ..TrainConfig::default()
    };
    c.set_field("hidden", hidden).unwrap();
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reductions_hold(
        seed in 0u64..1000,
        batch_size in 1usize..80,
        hidden in prop::sample::select(vec!["none", "4", "3x2"]),
        momentum in prop::sample::select(vec![0.0, 0.9]),
    ) {
        let (tr, val) = small(seed);
        let erm_cfg = config(seed, batch_size, hidden, momentum);
        let erm = train(&tr, &val, &erm_cfg).unwrap();

        let jtt = TrainConfig { algorithm: Algorithm::Jtt, lambda_up: 1, ..erm_cfg.clone() };
        prop_assert!(same(&train(&tr, &val, &jtt).unwrap(), &erm));

        let cvar = TrainConfig { algorithm: Algorithm::Cvar, alpha: 1.0, ..erm_cfg.clone() };
        prop_assert!(same(&train(&tr, &val, &cvar).unwrap(), &erm));

        let g = GroupId::new(0, 0);
        let idx: Vec<usize> = (0..tr.len()).filter(|&i| tr.examples()[i].group == Some(g)).collect();
        let one = tr.select("one-group", &idx).unwrap();
        let dro = TrainConfig { algorithm: Algorithm::GroupDro, ..erm_cfg.clone() };
        prop_assert!(same(&train(&one, &val, &dro).unwrap(), &train(&one, &val, &erm_cfg).unwrap()));

        let jtt5 = TrainConfig { algorithm: Algorithm::Jtt, lambda_up: 5, ..erm_cfg.clone() };
        let dynamic = TrainConfig { algorithm: Algorithm::JttDynamic, refresh_every: None, ..jtt5.clone() };
        let (a, b) = (train(&tr, &val, &jtt5).unwrap(), train(&tr, &val, &dynamic).unwrap());
        prop_assert!(same(&a, &b));
        prop_assert_eq!(a.error_set(), b.error_set());
    }
}

/// A refresh period at least as long as training never fires.
#[test]
fn refresh_longer_than_training_is_static() {
    let (tr, val) = small(4);
    let base = TrainConfig {
        algorithm: Algorithm::JttDynamic,
        epochs: 4,
        lambda_up: 6,
        ..TrainConfig::default()
    };
    let never = train(&tr, &val, &TrainConfig { refresh_every: Some(4), ..base.clone() }).unwrap();
    let inf = train(&tr, &val, &TrainConfig { refresh_every: None, ..base.clone() }).unwrap();
    assert!(same(&never, &inf));
    let often = train(&tr, &val, &TrainConfig { refresh_every: Some(1), ..base }).unwrap();
    match often.aux {
        grouprobust::trainers::Aux::Jtt { refreshes, .. } => assert_eq!(refreshes.len(), 3),
        other => panic!("unexpected aux {other:?}"),
    }
}
