use grouprobust::analysis::{enrichment_table, error_set_stats};
use grouprobust::datagen::{generate_synthetic, Dataset, SyntheticSpec};
use grouprobust::trainers::{lff_weight, ErrorSet};
use proptest::prelude::*;

fn train_set(seed: u64) -> Dataset {
    let spec = SyntheticSpec {
        n_train: 200,
        n_val: 8,
        n_test: 8,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec, seed).unwrap().train
}

proptest! {
    #[test]
    fn lff_weight_is_symmetric(p in 1e-6f64..1.0, q in 1e-6f64..1.0) {
        let w = lff_weight(p, q);
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((w + lff_weight(q, p) - 1.0).abs() < 1e-12);
        prop_assert!((lff_weight(p, p) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lff_weight_grows_as_the_biased_model_fails(p in 0.01f64..0.98, q in 0.01f64..0.99) {
        prop_assert!(lff_weight(p + 0.01, q) <= lff_weight(p, q) + 1e-12);
    }

    #[test]
    fn enrichment_is_bounded(seed in 0u64..100, picks in prop::collection::vec(0usize..200, 1..120)) {
        let train = train_set(seed);
        let set = ErrorSet::new(picks, 0);
        let table = enrichment_table(&set, &train).unwrap();
        let shares: f64 = table.rows.iter().map(|r| r.share).sum();
        prop_assert!((shares - 1.0).abs() < 1e-9);
        for row in &table.rows {
            prop_assert!(row.enrichment <= 1.0 / row.empirical_rate + 1e-9);
            let stats = error_set_stats(&set, &train, row.group).unwrap();
            prop_assert!((stats.enrichment - row.enrichment).abs() < 1e-12);
            prop_assert!(stats.precision <= 1.0 && stats.recall <= 1.0);
        }
    }
}
