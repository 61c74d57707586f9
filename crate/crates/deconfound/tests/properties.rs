use deconfound::stats::wilcoxon_greater;
use deconfound::{ExperimentConfig, ExperimentKind};
use proptest::prelude::*;

proptest! {
    #[test]
    fn config_snapshots_round_trip(
        seeds in prop::collection::btree_set(any::<u64>(), 1..6),
        epochs in 1usize..500,
        lr in 1e-6f64..1.0,
        slope in -1.0f64..1.0,
        labels in prop::option::of(1usize..100),
    ) {
        let mut c = ExperimentConfig::new(ExperimentKind::DaggerCurve);
        c.seeds = seeds.into_iter().collect();
        c.train.epochs = epochs;
        c.train.learning_rate = lr;
        c.expert.slope = slope;
        c.dagger_labels = labels;
        prop_assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn wilcoxon_p_values_are_probabilities(d in prop::collection::vec(-5i32..5, 1..80)) {
        let x: Vec<f64> = d.iter().map(|v| f64::from(*v)).collect();
        let zeros = vec![0.0; x.len()];
        let p = wilcoxon_greater(&x, &zeros);
        let q = wilcoxon_greater(&zeros, &x);
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q));
        // The two one-sided tails overlap at the observed statistic, so they cover everything.
        prop_assert!(p + q >= 1.0 - 1e-9);
    }
}
