use infoplane::dataset::{generate_dataset, load_dataset, make_split};
use infoplane::network::train;
use infoplane::{read_trace, write_trace, ActivationKind, NetworkConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_and_stratifies(fraction in 0.01f64..0.99, seed in 0u64..1000) {
        let data = generate_dataset(seed % 3);
        let split = make_split(&data, fraction, seed).unwrap();
        let mut all: Vec<usize> = split.train_indices.iter().chain(&split.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..data.len()).collect::<Vec<_>>());
        prop_assert_eq!(split.train_indices.len(), (fraction * data.len() as f64).floor() as usize);
        let ones = split.train_indices.iter().filter(|&&i| data.labels()[i] == 1).count();
        let zeros = split.train_indices.len() - ones;
        prop_assert!(ones.abs_diff(zeros) <= 1);
    }
}

#[test]
fn dataset_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let data = generate_dataset(11);
    data.write_csv(&path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back.inputs(), data.inputs());
    assert_eq!(back.labels(), data.labels());
    assert!(back.is_balanced());
}

#[test]
fn trace_round_trip_is_bit_identical() {
    let data = generate_dataset(0);
    let split = make_split(&data, 0.8, 0).unwrap();
    for kind in [ActivationKind::Softplus, ActivationKind::Prelu { slope: 0.2 }] {
        let config = NetworkConfig {
            epochs: 6,
            snapshot_epochs: Some(vec![0, 1, 2, 6]),
            ..NetworkConfig::with_activation(kind)
        };
        let (trace, _) = train(&config, &data, &split).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trace(&trace, dir.path()).unwrap();
        let back = read_trace(dir.path()).unwrap();
        assert_eq!(back.manifest(), trace.manifest());
        for (a, b) in trace.snapshots().iter().zip(back.snapshots()) {
            for (x, y) in a.layers.iter().zip(&b.layers) {
                let bits =
                    |m: &infoplane::Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(x), bits(y));
            }
        }
    }
}
