use proptest::prelude::*;

use imbalance::bench::{catalogue, pct_improvement, variance_to_mean, TechniqueSpec};
use imbalance::dataset::{
    generate_synthetic, read_csv, separation_statistic, stratified_split, write_csv, ColumnSchema,
    Dataset, GeneratorConfig, LoadOptions, SplitSpec,
};
use imbalance::decide::{
    apply_rule, equivalent_threshold, f1_at, isotonic_fit, platt_fit, reweight_probs,
    tune_threshold, DecisionRule,
};
use imbalance::forest::{fit, FitConfig};
use imbalance::resample::{resample, SamplerKind, SamplerSpec};
use imbalance::Matrix;

fn dataset(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset {
    let names: Vec<String> = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
    Dataset::new(
        ColumnSchema::continuous(&names, "failure").unwrap(),
        Matrix::from_rows(&rows).unwrap(),
        labels,
    )
    .unwrap()
}

/// Two-class data with at least `min_per_class` rows of each class.
fn labelled(min_per_class: usize, width: usize) -> impl Strategy<Value = Dataset> {
    let row = prop::collection::vec(-1e3f64..1e3, width);
    (
        prop::collection::vec(row.clone(), min_per_class..40),
        prop::collection::vec(row, min_per_class..12),
    )
        .prop_map(|(normals, failures)| {
            let labels = std::iter::repeat_n(0, normals.len())
                .chain(std::iter::repeat_n(1, failures.len()))
                .collect();
            dataset(normals.into_iter().chain(failures).collect(), labels)
        })
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((0.0f64..=1.0, any::<bool>()), 2..120)
        .prop_filter("both classes", |v| {
            v.iter().any(|x| x.1) && v.iter().any(|x| !x.1)
        })
        .prop_map(|v| v.into_iter().map(|(p, y)| (p, u8::from(y))).unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_write_is_a_fixed_point(d in labelled(1, 3)) {
        let mut first = Vec::new();
        write_csv(&d, &mut first).unwrap();
        let back = read_csv(first.as_slice(), d.schema(), LoadOptions::default()).unwrap();
        prop_assert_eq!(back.dropped, 0);
        prop_assert_eq!(back.dataset.labels(), d.labels());
        for (a, b) in back.dataset.features().as_slice().iter().zip(d.features().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
        }
        let mut second = Vec::new();
        write_csv(&back.dataset, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn split_partitions_each_class(d in labelled(3, 2), seed in any::<u64>()) {
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        let (train, val, test) = stratified_split(&d, &spec).unwrap();
        prop_assert_eq!(train.len() + val.len() + test.len(), d.len());
        prop_assert_eq!(train.n_failure() + val.n_failure() + test.n_failure(), d.n_failure());
        for part in [&train, &val, &test] {
            prop_assert!(part.n_failure() >= 1 && part.n_normal() >= 1);
        }
        let mut all: Vec<Vec<u64>> = [&train, &val, &test]
            .iter()
            .flat_map(|p| p.features().iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()))
            .collect();
        let mut orig: Vec<Vec<u64>> = d
            .features()
            .iter_rows()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        all.sort();
        orig.sort();
        prop_assert_eq!(all, orig);
    }

    #[test]
    fn forest_probabilities_in_unit_interval(d in labelled(2, 2), seed in any::<u64>()) {
        let cfg = FitConfig { n_trees: 7, seed, ..FitConfig::default() };
        let m = fit(&d, &cfg).unwrap();
        for p in m.predict_proba(d.features()).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((p + (1.0 - p) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn class_weight_scaling_leaves_forest_unchanged(
        d in labelled(2, 2),
        w in (0.1f64..10.0, 0.1f64..10.0),
        c in prop::sample::select(vec![0.25, 2.0, 8.0]),
    ) {
        let base = FitConfig { n_trees: 5, class_weights: w, seed: 3, ..FitConfig::default() };
        let scaled = FitConfig { class_weights: (c * w.0, c * w.1), ..base.clone() };
        let a = fit(&d, &base).unwrap().predict_proba(d.features()).unwrap();
        let b = fit(&d, &scaled).unwrap().predict_proba(d.features()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn reweighting_equals_shifted_threshold(
        p in 0.0f64..=1.0,
        w0 in 1e-3f64..1e3,
        w1 in 1e-3f64..1e3,
        t in 0.0f64..=1.0,
    ) {
        let reweighted = u8::from(reweight_probs(p, (w0, w1)) >= t);
        let shifted = u8::from(p >= equivalent_threshold(t, (w0, w1)));
        prop_assert_eq!(reweighted, shifted);
        let rule = DecisionRule { reweight: Some((w0, w1)), threshold: t, ..DecisionRule::default() };
        prop_assert_eq!(apply_rule(&rule, &[p]).unwrap(), vec![reweighted]);
    }

    #[test]
    fn reweighting_is_monotone(p in 0.0f64..1.0, dp in 1e-9f64..0.5, w0 in 0.01f64..100.0, w1 in 0.01f64..100.0) {
        let q = (p + dp).min(1.0);
        prop_assert!(reweight_probs(p, (w0, w1)) <= reweight_probs(q, (w0, w1)));
    }

    #[test]
    fn calibrators_are_monotone((probs, labels) in scored()) {
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        for cal in [isotonic_fit(&probs, &labels).unwrap(), platt_fit(&probs, &labels).unwrap()] {
            let out: Vec<f64> = grid.iter().map(|&p| cal.apply(p)).collect();
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]), "{:?}", cal);
            prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn tuned_threshold_dominates_default((probs, labels) in scored()) {
        let t = tune_threshold(&probs, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
        prop_assert!(f1_at(&probs, &labels, t) >= f1_at(&probs, &labels, 0.5));
    }

    #[test]
    fn vmr_scales_linearly(xs in prop::collection::vec(0.01f64..1.0, 2..50), c in 0.5f64..4.0) {
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let (a, b) = (variance_to_mean(&xs), variance_to_mean(&scaled));
        prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + b.abs()));
    }

    #[test]
    fn pct_improvement_sign(mean in 0.0f64..1.0, base in 0.01f64..1.0) {
        let pct = pct_improvement(mean, base);
        prop_assert_eq!(pct > 0.0, mean > base);
        prop_assert_eq!(pct_improvement(base, base), 0.0);
    }

    #[test]
    fn value_preserving_samplers_never_alter_features(d in labelled(2, 2), seed in any::<u64>()) {
        let key = |r: &[f64]| r.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
        let originals: std::collections::HashSet<Vec<u64>> = d.features().iter_rows().map(key).collect();
        for kind in [SamplerKind::Ros, SamplerKind::Rus, SamplerKind::ClusterMassaging] {
            let mut spec = SamplerSpec::new(kind).with_seed(seed);
            spec.n_clusters = Some(2);
            let out = resample(&d, &spec, None).unwrap();
            for row in out.data.features().iter_rows() {
                prop_assert!(originals.contains(&key(row)), "{} invented a row", kind.name());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn separation_never_grows_with_overlap(seed in any::<u64>()) {
        let stats: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&overlap| {
                let cfg = GeneratorConfig { n_normal: 600, n_failure: 60, overlap, seed, ..GeneratorConfig::default() };
                separation_statistic(&generate_synthetic(&cfg).unwrap()).unwrap()
            })
            .collect();
        prop_assert!(stats.windows(2).all(|w| w[1] <= w[0]), "{:?}", stats);
    }
}

#[test]
fn catalogue_ids_round_trip() {
    for (id, keys, _) in catalogue() {
        let spec = TechniqueSpec::parse(&id).unwrap();
        assert_eq!(spec.id(), id);
        assert!(spec.params().keys().all(|k| keys.contains(&k.as_str())));
    }
    let parsed = TechniqueSpec::parse("pre:smote?k=5&ratio=1.0").unwrap();
    assert_eq!(parsed.params().get("k").map(String::as_str), Some("5"));
    let rejected = [
        "pre:nope",
        "mid:ros",
        "pre:ros?ratio=2",
        "pre:ros?ratio=0.5&ratio=0.5",
        "post:threshold?x=1",
        "pre:smote?k",
    ];
    for bad in rejected {
        assert!(
            TechniqueSpec::parse(bad).is_err(),
            "{bad} should be rejected"
        );
    }
}
