use fact_core::data::{AcquisitionUnits, CostSchedule, Dataset, FeatureGroup};
use fact_core::model::{CorruptionConfig, Corruptor};
use fact_core::MaskVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Upper 1% point of the chi-square distribution with 19 degrees of freedom.
const CHI2_19_P01: f64 = 36.191;

fn units(d: usize) -> AcquisitionUnits {
    AcquisitionUnits::singletons(&vec![1.0; d]).unwrap()
}

fn missing_counts(cfg: &CorruptionConfig, d: usize, n: usize) -> Vec<usize> {
    let corruptor = Corruptor::new(cfg).unwrap();
    let units = units(d);
    let full = MaskVector::all_known(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = vec![0; d];
    for _ in 0..n {
        let k = corruptor.corrupt(&full, &units, &mut rng);
        for (j, c) in counts.iter_mut().enumerate() {
            if !k.is_known(j) {
                *c += 1;
            }
        }
    }
    counts
}

#[test]
fn missing_rate_is_equal_across_features() {
    let d = 20;
    let n = 20_000;
    let counts = missing_counts(&CorruptionConfig::default(), d, n);
    let total: usize = counts.iter().sum();
    let rate = total as f64 / (d * n) as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let (miss, keep) = (c as f64, (n - c) as f64);
            let (em, ek) = (n as f64 * rate, n as f64 * (1.0 - rate));
            (miss - em).powi(2) / em + (keep - ek).powi(2) / ek
        })
        .sum();
    assert!(chi2 < CHI2_19_P01, "chi2 = {chi2}");
}

#[test]
fn mean_missing_fraction_matches_beta_mean() {
    for (alpha, beta) in [(1.5, 1.5), (5.5, 1.5), (1.5, 3.5)] {
        let cfg = CorruptionConfig {
            alpha,
            beta,
            seed: 4,
            fixed_rate: None,
        };
        let (d, n) = (10, 40_000);
        let total: usize = missing_counts(&cfg, d, n).iter().sum();
        let observed = total as f64 / (d * n) as f64;
        let expected = alpha / (alpha + beta);
        assert!((observed - expected).abs() < 0.01, "{alpha},{beta}: {observed} vs {expected}");
    }
}

#[test]
fn zero_rate_keeps_mask() {
    let cfg = CorruptionConfig {
        fixed_rate: Some(0.0),
        ..CorruptionConfig::default()
    };
    assert_eq!(missing_counts(&cfg, 5, 100), vec![0; 5]);
}

#[test]
fn already_unknown_features_stay_unknown() {
    let corruptor = Corruptor::new(&CorruptionConfig::default()).unwrap();
    let d = 6;
    let mut k0 = MaskVector::all_known(d);
    k0.set_unknown(2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let k = corruptor.corrupt(&k0, &units(d), &mut rng);
        assert!(!k.is_known(2));
        assert!(k.is_subset_of(&k0));
    }
}

#[test]
fn groups_are_hidden_together() {
    let ds = Dataset::new(
        "g",
        vec![vec![0.0; 5]],
        vec![0],
        (0..5).map(|j| format!("f{j}")).collect(),
        vec!["a".into()],
    )
    .unwrap()
    .with_groups(vec![FeatureGroup {
        id: "g".into(),
        members: vec![1, 3, 4],
    }])
    .unwrap();
    let units = AcquisitionUnits::new(
        &ds,
        &CostSchedule {
            feature_costs: vec![1.0; 5],
            group_costs: vec![2.0],
        },
    )
    .unwrap();
    let corruptor = Corruptor::new(&CorruptionConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let full = MaskVector::all_known(5);
    for _ in 0..500 {
        let k = corruptor.corrupt(&full, &units, &mut rng);
        assert_eq!(k.is_known(1), k.is_known(3));
        assert_eq!(k.is_known(1), k.is_known(4));
    }
}
