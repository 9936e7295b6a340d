use grouprobust::datagen::{generate_synthetic, load_csv, strip_group_annotations, CsvSchema, SyntheticSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn save_load_save_is_byte_stable(seed in any::<u64>(), noise_dims in 0usize..4, annotated in any::<bool>()) {
        let spec = SyntheticSpec { n_train: 30, n_val: 8, n_test: 8, noise_dims, ..SyntheticSpec::default() };
        let mut data = generate_synthetic(&spec, seed).unwrap().train;
        if !annotated {
            data = strip_group_annotations(&data);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        data.save_csv(&path).unwrap();
        let schema = CsvSchema::standard(data.feature_dim(), annotated);
        let back = load_csv(&path, &schema).unwrap();
        prop_assert_eq!(back.examples(), data.examples());
        prop_assert_eq!(back.to_csv_string(), data.to_csv_string());
    }
}
