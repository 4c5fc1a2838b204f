use fact_core::acquire::{run_policy, AcquisitionSession, FactPolicy, Policy, RowOracle, StoppingRule};
use fact_core::baselines::{static_mi_order, ExhaustivePolicy, HistogramModel, RandomPolicy};
use fact_core::data::{AcquisitionUnits, Dataset};
use fact_core::eval::{
    acquisition_order_matrix, compare_policies, simulate, write_curves_csv, PolicyKind,
};
use fact_core::model::{ArchitectureSpec, ModelBundle};
use fact_core::nn::{Activation, Dense, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BITS: usize = 4;

fn arch(d: usize) -> ArchitectureSpec {
    ArchitectureSpec {
        n_features: d,
        bits: BITS,
        encoder: vec![6],
        predictor: vec![3],
        n_classes: 2,
    }
}

/// Bundle whose predictor looks only at the most significant bit of
/// `feature`.
fn single_feature_bundle(d: usize, feature: usize) -> ModelBundle {
    let mut b = ModelBundle::random(&arch(d), AcquisitionUnits::singletons(&vec![1.0; d]).unwrap(), 3).unwrap();
    let width = d * BITS;
    let mut weights = vec![0.0; 2 * width];
    weights[feature * BITS] = 4.0;
    weights[width + feature * BITS] = -4.0;
    b.predictor = Network::from_layers(vec![Dense {
        rows: 2,
        cols: width,
        activation: Activation::Softmax,
        weights,
        bias: vec![0.0, 0.0],
    }])
    .unwrap();
    b
}

fn noise_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| (0..d).map(|_| f64::from(rng.random_range(0..16u32)) / 16.0).collect())
        .collect();
    let targets = (0..n).map(|_| rng.random_range(0..2)).collect();
    Dataset::new(
        "noise",
        rows,
        targets,
        (0..d).map(|j| format!("f{j}")).collect(),
        vec!["a".into(), "b".into()],
    )
    .unwrap()
}

#[test]
fn both_criteria_pick_the_only_relevant_feature() {
    let d = 5;
    let b = single_feature_bundle(d, 3);
    let s = AcquisitionSession::empty(&b).unwrap();
    assert_eq!(FactPolicy.select(&b, &s, 0).unwrap().unit, 3);
    let ex = ExhaustivePolicy::new(HistogramModel::uniform(d));
    let utilities = ex.utilities(&b, &s).unwrap();
    for (u, util) in utilities {
        assert_eq!(util > 0.0, u == 3, "unit {u} utility {util}");
    }
    assert_eq!(ex.select(&b, &s, 0).unwrap().unit, 3);
}

#[test]
fn exhaustive_prefers_cheaper_of_equal_features() {
    let d = 4;
    let mut b = single_feature_bundle(d, 1);
    b.manifest.units = AcquisitionUnits::singletons(&[1.0, 2.0, 1.0, 1.0]).unwrap();
    // feature 1 is the only useful one even when it costs double
    let s = AcquisitionSession::empty(&b).unwrap();
    let ex = ExhaustivePolicy::new(HistogramModel::uniform(d));
    assert_eq!(ex.select(&b, &s, 0).unwrap().unit, 1);
}

#[test]
fn static_order_ranks_label_copy_first() {
    let mut ds = noise_dataset(400, 4, 2);
    let labels = ds.targets().to_vec();
    let rows: Vec<Vec<f64>> = (0..ds.n_instances())
        .map(|i| {
            let mut r = ds.row(i).to_vec();
            r[2] = labels[i] as f64 * 0.5;
            r
        })
        .collect();
    ds = Dataset::new("copy", rows, labels, ds.feature_names.clone(), ds.class_names.clone()).unwrap();
    let units = AcquisitionUnits::singletons(&[1.0, 1.0, 1.0, 1.0]).unwrap();
    let order = static_mi_order(&ds, &units, false).unwrap();
    assert_eq!(order.entries[0].unit, 2);
    assert!((order.entries[0].mi - ds_entropy(ds.targets())).abs() < 1e-9);

    let pricey = AcquisitionUnits::singletons(&[1.0, 1.0, 1000.0, 1.0]).unwrap();
    let by_cost = static_mi_order(&ds, &pricey, true).unwrap();
    assert_ne!(by_cost.entries[0].unit, 2);

    let mut out = Vec::new();
    order.write_csv(&mut out, &units).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("rank,id,mi,cost\n1,f2,"));
}

fn ds_entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let p = labels.iter().filter(|&&l| l == 1).count() as f64 / n;
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

#[test]
fn random_policy_on_noise_gives_flat_curve() {
    let d = 8;
    let test = noise_dataset(600, d, 9);
    let b = ModelBundle::random(&arch(d), AcquisitionUnits::singletons(&vec![1.0; d]).unwrap(), 5).unwrap();
    let sim = simulate(&b, &test, &RandomPolicy::new(1), &StoppingRule::Exhaustion).unwrap();
    // least-squares slope of per-instance correctness against cost
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in &sim.trajectories {
        for p in &t.points {
            xs.push(p.cost);
            ys.push(if p.correct == Some(true) { 1.0 } else { 0.0 });
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let resid: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    // instances contribute d+1 correlated points each; inflate accordingly
    let se = (resid / (n - 2.0) / sxx).sqrt() * ((d + 1) as f64).sqrt();
    assert!(slope.abs() <= 1.96 * se, "slope {slope} se {se}");
}

#[test]
fn deterministic_policies_have_zero_width_intervals() {
    let d = 5;
    let test = noise_dataset(60, d, 4);
    let b = ModelBundle::random(&arch(d), AcquisitionUnits::singletons(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 5).unwrap();
    let kinds = [PolicyKind::Fact, PolicyKind::Random, PolicyKind::Static, PolicyKind::Exhaustive];
    let cmp = compare_policies(&b, &test, &test, &kinds, &[1, 2, 3], &StoppingRule::Exhaustion).unwrap();
    for c in &cmp.curves {
        let zero = c.points.iter().all(|p| p.ci_low == p.ci_high);
        assert_eq!(zero, c.policy != "random", "{}", c.policy);
        assert!(c.points.windows(2).all(|w| w[1].mean_cost >= w[0].mean_cost));
    }
    let again = compare_policies(&b, &test, &test, &kinds, &[1, 2, 3], &StoppingRule::Exhaustion).unwrap();
    assert_eq!(cmp.report, again.report);
    assert_eq!(cmp.report.policies[0].accuracy_at_fraction.len(), 5);

    let mut out = Vec::new();
    write_curves_csv(&cmp.curves, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("policy,step,mean_cost,accuracy,ci_low,ci_high\nfact,0,0,"));
    assert_eq!(text.lines().count(), 1 + kinds.len() * (d + 1));
}

#[test]
fn exhaustion_order_rows_are_permutations() {
    let d = 6;
    let test = noise_dataset(20, d, 6);
    let b = ModelBundle::random(&arch(d), AcquisitionUnits::singletons(&vec![1.0; d]).unwrap(), 2).unwrap();
    let rows: Vec<usize> = (0..20).collect();
    let (m, _) = acquisition_order_matrix(&b, &test, &rows, &FactPolicy, &StoppingRule::Exhaustion).unwrap();
    for r in &m.ranks {
        let mut sorted = r.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=d).collect::<Vec<_>>());
    }
    let (again, _) = acquisition_order_matrix(&b, &test, &rows, &FactPolicy, &StoppingRule::Exhaustion).unwrap();
    assert_eq!(m, again);
}

#[test]
fn budget_and_confidence_rules_stop_early() {
    let d = 4;
    let b = single_feature_bundle(d, 0);
    let row = [0.75, 0.1, 0.2, 0.3];
    let t = run_policy(&b, &RowOracle(&row), Some(0), &FactPolicy, &StoppingRule::Budget(2.0), 0).unwrap();
    assert_eq!(t.points.len(), 3);
    assert!(t.points.last().unwrap().cost <= 2.0);
    let t = run_policy(&b, &RowOracle(&row), Some(0), &FactPolicy, &StoppingRule::Confidence(0.8), 0).unwrap();
    assert_eq!(t.acquired_units(), vec![0]);
    assert!(t.points.last().unwrap().top_probability >= 0.8);
}
