use grouprobust::analysis::Criterion;
use grouprobust::datagen::{generate_synthetic, SyntheticSpec, SyntheticSplits};
use grouprobust::exec::Execution;
use grouprobust::trainers::{Algorithm, TrainConfig};
use grouprobust::tuning::{early_stop, grid_sweep_with, validation_size_study, Grid};
use proptest::prelude::*;

fn splits(seed: u64) -> SyntheticSplits {
    let spec = SyntheticSpec {
        n_train: 240,
        n_val: 80,
        n_test: 80,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec, seed).unwrap()
}

fn grid(algorithm: Algorithm) -> Grid {
    let base = TrainConfig {
        algorithm,
        epochs: 4,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let g = Grid::single(base).axis("learning_rate", &["0.05", "0.2"]);
    match algorithm {
        Algorithm::Jtt => g.axis("lambda_up", &["3", "8"]),
        Algorithm::Cvar => g.axis("alpha", &["0.1", "0.5"]),
        _ => g,
    }
}

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop::sample::select(vec![Algorithm::Erm, Algorithm::Jtt, Algorithm::Cvar])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn sweeps_are_deterministic_and_schedule_free(seed in 0u64..500, a in algorithm()) {
        let s = splits(seed);
        let g = grid(a).with_seed(seed);
        let run = |exec| grid_sweep_with(&g, &s.train, &s.val, &s.test, Criterion::WorstGroup, exec).unwrap();
        let first = run(Execution::Sequential);
        prop_assert_eq!(&first, &run(Execution::Sequential));
        prop_assert_eq!(&first, &run(Execution::Parallel));
    }

    #[test]
    fn selection_is_an_argmax(seed in 0u64..500, a in algorithm()) {
        let s = splits(seed);
        let r = grid_sweep_with(&grid(a).with_seed(seed), &s.train, &s.val, &s.test, Criterion::Average, Execution::default()).unwrap();
        let wg = r.rows[r.best_by_worst_group].by_worst_group.val_worst_group;
        let avg = r.rows[r.best_by_average].by_average.val_average;
        for row in &r.rows {
            prop_assert!(row.by_worst_group.val_worst_group <= wg);
            prop_assert!(row.by_average.val_average <= avg);
        }
        prop_assert!(wg >= r.rows[r.best_by_average].by_average.val_worst_group);
    }

    #[test]
    fn full_fraction_study_equals_the_sweep(seed in 0u64..500) {
        let s = splits(seed);
        let g = grid(Algorithm::Erm);
        let study = validation_size_study(&[1.0], &g, &s.train, &s.val, &s.test, &[seed], Criterion::WorstGroup, Execution::default()).unwrap();
        let sweep = grid_sweep_with(&g.with_seed(seed), &s.train, &s.val, &s.test, Criterion::WorstGroup, Execution::default()).unwrap();
        prop_assert_eq!(&study[0].sweeps[0], &sweep);
        prop_assert_eq!(study[0].test_worst_group[0], sweep.selected().test_worst_group);
        prop_assert_eq!(study[0].val_sizes[0], s.val.len());
    }
}

#[test]
fn early_stopped_metric_is_the_history_maximum() {
    let s = splits(3);
    let cfg = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let r = grouprobust::trainers::train(&s.train, &s.val, &cfg).unwrap();
    for c in [Criterion::WorstGroup, Criterion::Average] {
        let e = early_stop(&r.history, c).unwrap();
        let score = |h: &grouprobust::trainers::EpochRecord| match c {
            Criterion::WorstGroup => h.val_worst_group,
            Criterion::Average => h.val_average,
        };
        let max = r.history.iter().map(score).fold(f64::MIN, f64::max);
        assert_eq!(score(&r.history[e]), max);
    }
}
