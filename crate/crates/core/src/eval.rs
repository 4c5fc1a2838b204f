//! Batch simulation over a test split: accuracy-versus-cost curves, the
//! normalized area under them, policy comparisons with normal-approximation
//! confidence intervals, corruption-parameter sweeps and acquisition-order
//! matrices.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::acquire::{run_policy, FactPolicy, Policy, RowOracle, StoppingRule, Trajectory};
use crate::baselines::{static_mi_order, ExhaustivePolicy, HistogramModel, RandomPolicy, StaticPolicy};
use crate::data::Dataset;
use crate::error::{FactError, Result};
use crate::model::{CorruptionConfig, ModelBundle};

/// Cost fractions at which summary accuracies are reported.
pub const COST_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Tolerance below the maximum accuracy that still counts as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 0.001;

const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_cost: f64,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Mean accuracy after each number of acquisitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub policy: String,
    pub points: Vec<CurvePoint>,
    pub n_instances: usize,
    pub seeds: Vec<u64>,
}

impl CostCurve {
    /// Curve from `(mean_cost, accuracy)` pairs with zero-width intervals.
    pub fn from_pairs(policy: impl Into<String>, pairs: &[(f64, f64)], n_instances: usize) -> Self {
        Self {
            policy: policy.into(),
            points: pairs
                .iter()
                .enumerate()
                .map(|(step, &(mean_cost, accuracy))| CurvePoint {
                    step,
                    mean_cost,
                    accuracy,
                    ci_low: accuracy,
                    ci_high: accuracy,
                })
                .collect(),
            n_instances,
            seeds: Vec::new(),
        }
    }

    pub fn max_accuracy(&self) -> f64 {
        self.points.iter().map(|p| p.accuracy).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the first point whose accuracy is within the convergence
    /// tolerance of the maximum.
    pub fn convergence_index(&self) -> usize {
        let target = self.max_accuracy() - CONVERGENCE_TOLERANCE;
        self.points.iter().position(|p| p.accuracy >= target).unwrap_or(0)
    }

    pub fn convergence_cost(&self) -> f64 {
        self.points.get(self.convergence_index()).map_or(0.0, |p| p.mean_cost)
    }

    /// Accuracy at `cost`, linearly interpolated between neighbouring points
    /// and held constant past the ends.
    pub fn accuracy_at_cost(&self, cost: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return f64::NAN;
        }
        if cost <= pts[0].mean_cost {
            return pts[0].accuracy;
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if cost <= b.mean_cost {
                let span = b.mean_cost - a.mean_cost;
                if span <= 0.0 {
                    return b.accuracy;
                }
                let t = (cost - a.mean_cost) / span;
                return a.accuracy + t * (b.accuracy - a.accuracy);
            }
        }
        pts[pts.len() - 1].accuracy
    }

    /// Keeps the first `steps + 1` points.
    pub fn truncated(&self, steps: usize) -> Self {
        let mut out = self.clone();
        out.points.truncate(steps + 1);
        out
    }
}

/// Normalized area under the curve from cost zero to the convergence cost.
/// A curve that has converged at cost zero scores its initial accuracy.
pub fn auacc(curve: &CostCurve) -> Result<f64> {
    if curve.points.len() < 2 {
        return Err(FactError::InvalidParameter(
            "area under the curve needs at least two points".into(),
        ));
    }
    let end = curve.convergence_index();
    let span = curve.points[end].mean_cost - curve.points[0].mean_cost;
    if end == 0 || span <= 0.0 {
        return Ok(curve.points[0].accuracy);
    }
    let area: f64 = curve.points[..=end]
        .windows(2)
        .map(|w| 0.5 * (w[0].accuracy + w[1].accuracy) * (w[1].mean_cost - w[0].mean_cost))
        .sum();
    Ok(area / span)
}

/// Trajectories of every test instance under one policy plus their curve.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub curve: CostCurve,
    pub trajectories: Vec<Trajectory>,
    /// Steps kept when an accuracy-fraction rule truncated the runs.
    pub stop_step: Option<usize>,
}

/// Runs `policy` on every test instance from the all-unknown state.
///
/// Instances that stop early keep their last state for later steps. Under
/// an accuracy-fraction rule every instance is run to exhaustion and the
/// curve is cut at the first step reaching that fraction of the best
/// accuracy.
pub fn simulate(bundle: &ModelBundle, test: &Dataset, policy: &dyn Policy, stopping: &StoppingRule) -> Result<Simulation> {
    simulate_instances(bundle, test, &(0..test.n_instances()).collect::<Vec<_>>(), policy, stopping)
}

/// [`simulate`] restricted to the listed test rows.
pub fn simulate_instances(
    bundle: &ModelBundle,
    test: &Dataset,
    rows: &[usize],
    policy: &dyn Policy,
    stopping: &StoppingRule,
) -> Result<Simulation> {
    if rows.is_empty() {
        return Err(FactError::EmptySplit("test"));
    }
    stopping.validate()?;
    let run_rule = match stopping {
        StoppingRule::AccuracyFraction(_) => StoppingRule::Exhaustion,
        other => *other,
    };
    let trajectories = rows
        .iter()
        .map(|&i| {
            run_policy(
                bundle,
                &RowOracle(test.row(i)),
                Some(test.target(i)),
                policy,
                &run_rule,
                i,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = curve_from_trajectories(policy.name(), &trajectories);
    let (curve, stop_step) = match *stopping {
        StoppingRule::AccuracyFraction(f) => {
            let target = f * curve.max_accuracy();
            let s = curve.points.iter().position(|p| p.accuracy >= target).unwrap_or(curve.points.len() - 1);
            (curve.truncated(s), Some(s))
        }
        _ => (curve, None),
    };
    Ok(Simulation {
        curve,
        trajectories,
        stop_step,
    })
}

/// Averages cost and correctness across trajectories step by step.
pub fn curve_from_trajectories(policy: &str, trajectories: &[Trajectory]) -> CostCurve {
    let steps = trajectories.iter().map(|t| t.points.len()).max().unwrap_or(0);
    let n = trajectories.len() as f64;
    let pairs: Vec<(f64, f64)> = (0..steps)
        .map(|s| {
            let mut cost = 0.0;
            let mut correct = 0.0;
            for t in trajectories {
                let p = &t.points[s.min(t.points.len() - 1)];
                cost += p.cost;
                if p.correct == Some(true) {
                    correct += 1.0;
                }
            }
            (cost / n, correct / n)
        })
        .collect();
    CostCurve::from_pairs(policy, &pairs, trajectories.len())
}

/// Summary of one policy's curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub auacc: f64,
    pub auacc_ci_low: f64,
    pub auacc_ci_high: f64,
    pub convergence_cost: f64,
    pub max_accuracy: f64,
    pub total_cost: f64,
    /// Accuracy at each of [`COST_FRACTIONS`] of the total cost.
    pub accuracy_at_fraction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuaccReport {
    pub cost_fractions: Vec<f64>,
    pub policies: Vec<PolicySummary>,
}

impl AuaccReport {
    pub fn get(&self, policy: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == policy)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Summary of a curve; `auacc_values` are the per-run areas the interval
/// is computed from.
pub fn summarize(curve: &CostCurve, total_cost: f64, auacc_values: &[f64]) -> Result<PolicySummary> {
    let area = auacc(curve)?;
    let (lo, hi) = if auacc_values.len() > 1 {
        mean_ci(auacc_values).1
    } else {
        (area, area)
    };
    Ok(PolicySummary {
        policy: curve.policy.clone(),
        auacc: area,
        auacc_ci_low: lo,
        auacc_ci_high: hi,
        convergence_cost: curve.convergence_cost(),
        max_accuracy: curve.max_accuracy(),
        total_cost,
        accuracy_at_fraction: COST_FRACTIONS.iter().map(|f| curve.accuracy_at_cost(f * total_cost)).collect(),
    })
}

/// Mean and `mean ± 1.96·stderr`.
pub fn mean_ci(values: &[f64]) -> (f64, (f64, f64)) {
    if values.windows(2).all(|w| w[0] == w[1]) {
        let v = values.first().copied().unwrap_or(f64::NAN);
        return (v, (v, v));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, (mean, mean));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = Z95 * (var / n).sqrt();
    (mean, (mean - half, mean + half))
}

/// Policies the harness knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Fact,
    Random,
    Static,
    StaticCost,
    Exhaustive,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Fact => "fact",
            PolicyKind::Random => "random",
            PolicyKind::Static => "static",
            PolicyKind::StaticCost => "static_cost",
            PolicyKind::Exhaustive => "exhaustive",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        [
            PolicyKind::Fact,
            PolicyKind::Random,
            PolicyKind::Static,
            PolicyKind::StaticCost,
            PolicyKind::Exhaustive,
        ]
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| FactError::InvalidParameter(format!("unknown policy {name:?}")))
    }

    /// Whether the policy's choices depend on the seed.
    pub fn is_stochastic(self) -> bool {
        self == PolicyKind::Random
    }

    /// Builds the policy; `train` supplies statistics for the baselines.
    pub fn build(self, bundle: &ModelBundle, train: &Dataset, seed: u64) -> Result<Box<dyn Policy>> {
        Ok(match self {
            PolicyKind::Fact => Box::new(FactPolicy),
            PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
            PolicyKind::Static => Box::new(StaticPolicy::new(&static_mi_order(train, bundle.units(), false)?)),
            PolicyKind::StaticCost => Box::new(StaticPolicy::new(&static_mi_order(train, bundle.units(), true)?)),
            PolicyKind::Exhaustive => Box::new(ExhaustivePolicy::new(HistogramModel::fit(train)?)),
        })
    }
}

/// Curves (with per-step intervals across seeds) and the summary report.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub curves: Vec<CostCurve>,
    pub report: AuaccReport,
}

impl Comparison {
    pub fn curve(&self, policy: &str) -> Option<&CostCurve> {
        self.curves.iter().find(|c| c.policy == policy)
    }

    /// Fraction of shared cost grid points where `a` is at least as accurate
    /// as `b`. The grid is `grid` evenly spaced costs over the shorter curve.
    pub fn dominance(&self, a: &str, b: &str, grid: usize) -> Option<f64> {
        let (ca, cb) = (self.curve(a)?, self.curve(b)?);
        Some(dominance(ca, cb, grid))
    }
}

/// Fraction of `grid` evenly spaced costs in `(0, shared max]` at which `a`
/// is at least as accurate as `b`.
pub fn dominance(a: &CostCurve, b: &CostCurve, grid: usize) -> f64 {
    let end = |c: &CostCurve| c.points.last().map_or(0.0, |p| p.mean_cost);
    let max = end(a).min(end(b));
    if grid == 0 || max <= 0.0 {
        return 1.0;
    }
    let wins = (1..=grid)
        .filter(|&g| {
            let c = max * g as f64 / grid as f64;
            a.accuracy_at_cost(c) >= b.accuracy_at_cost(c)
        })
        .count();
    wins as f64 / grid as f64
}

/// Simulates every policy on `test`, once per seed for stochastic policies
/// and once overall for deterministic ones.
pub fn compare_policies(
    bundle: &ModelBundle,
    train: &Dataset,
    test: &Dataset,
    kinds: &[PolicyKind],
    seeds: &[u64],
    stopping: &StoppingRule,
) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(FactError::InvalidParameter("at least one seed is required".into()));
    }
    let total_cost = bundle.units().total_cost();
    let mut curves = Vec::new();
    let mut policies = Vec::new();
    for &kind in kinds {
        let run_seeds: &[u64] = if kind.is_stochastic() { seeds } else { &seeds[..1] };
        let mut runs = Vec::new();
        for &seed in run_seeds {
            let policy = kind.build(bundle, train, seed)?;
            runs.push(simulate(bundle, test, policy.as_ref(), stopping)?.curve);
        }
        let areas = runs.iter().map(auacc).collect::<Result<Vec<_>>>()?;
        let mut curve = merge_runs(kind.name(), &runs);
        curve.seeds = run_seeds.to_vec();
        let mut summary = summarize(&curve, total_cost, &areas)?;
        if runs.len() > 1 {
            summary.auacc = mean_ci(&areas).0;
        }
        curves.push(curve);
        policies.push(summary);
    }
    Ok(Comparison {
        curves,
        report: AuaccReport {
            cost_fractions: COST_FRACTIONS.to_vec(),
            policies,
        },
    })
}

/// Pointwise mean of several runs' curves with 95% intervals on accuracy.
pub fn merge_runs(policy: &str, runs: &[CostCurve]) -> CostCurve {
    let steps = runs.iter().map(|r| r.points.len()).max().unwrap_or(0);
    let points = (0..steps)
        .map(|s| {
            let at = |r: &CostCurve| r.points[s.min(r.points.len() - 1)];
            let costs: Vec<f64> = runs.iter().map(|r| at(r).mean_cost).collect();
            let accs: Vec<f64> = runs.iter().map(|r| at(r).accuracy).collect();
            let (accuracy, (ci_low, ci_high)) = mean_ci(&accs);
            CurvePoint {
                step: s,
                mean_cost: mean_ci(&costs).0,
                accuracy,
                ci_low,
                ci_high,
            }
        })
        .collect();
    CostCurve {
        policy: policy.into(),
        points,
        n_instances: runs.first().map_or(0, |r| r.n_instances),
        seeds: Vec::new(),
    }
}

/// Writes `policy,step,mean_cost,accuracy,ci_low,ci_high` for every curve.
pub fn write_curves_csv<W: Write>(curves: &[CostCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "step", "mean_cost", "accuracy", "ci_low", "ci_high"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.policy.clone(),
                p.step.to_string(),
                p.mean_cost.to_string(),
                p.accuracy.to_string(),
                p.ci_low.to_string(),
                p.ci_high.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| FactError::io("<curves>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub auacc: f64,
    pub full_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Largest minus smallest AUACC across rows.
    pub spread: f64,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "beta", "auacc", "full_accuracy"])?;
        for r in &self.rows {
            w.write_record([
                r.alpha.to_string(),
                r.beta.to_string(),
                r.auacc.to_string(),
                r.full_accuracy.to_string(),
            ])?;
        }
        w.flush().map_err(|e| FactError::io("<sweep>", e))?;
        Ok(())
    }
}

/// For each `(alpha, beta)` pair obtains a bundle from `train_bundle` and
/// measures the AUACC of the sensitivity policy run to exhaustion.
pub fn beta_sweep<F>(test: &Dataset, base: &CorruptionConfig, pairs: &[(f64, f64)], mut train_bundle: F) -> Result<SweepReport>
where
    F: FnMut(&CorruptionConfig) -> Result<ModelBundle>,
{
    let mut rows = Vec::with_capacity(pairs.len());
    for &(alpha, beta) in pairs {
        let cfg = CorruptionConfig { alpha, beta, ..*base };
        let bundle = train_bundle(&cfg)?;
        let sim = simulate(&bundle, test, &FactPolicy, &StoppingRule::Exhaustion)?;
        rows.push(SweepRow {
            alpha,
            beta,
            auacc: auacc(&sim.curve)?,
            full_accuracy: sim.curve.points.last().map_or(f64::NAN, |p| p.accuracy),
        });
    }
    let lo = rows.iter().map(|r| r.auacc).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.auacc).fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepReport {
        spread: if rows.is_empty() { 0.0 } else { hi - lo },
        rows,
    })
}

/// Acquisition rank (1-based) of every unit per instance; 0 marks a unit
/// never acquired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderMatrix {
    pub instances: Vec<usize>,
    pub ranks: Vec<Vec<usize>>,
}

impl OrderMatrix {
    /// Builds the matrix from trajectories, keeping at most `max_steps`
    /// acquisitions per instance.
    pub fn from_trajectories(instances: &[usize], trajectories: &[Trajectory], n_units: usize, max_steps: Option<usize>) -> Self {
        let ranks = trajectories
            .iter()
            .map(|t| {
                let mut row = vec![0; n_units];
                let acquired = t.acquired_units();
                let keep = max_steps.unwrap_or(acquired.len()).min(acquired.len());
                for (r, &u) in acquired[..keep].iter().enumerate() {
                    row[u] = r + 1;
                }
                row
            })
            .collect();
        Self {
            instances: instances.to_vec(),
            ranks,
        }
    }

    /// Mean fraction of `units` acquired per instance.
    pub fn fill_rate(&self, units: &[usize]) -> f64 {
        if self.ranks.is_empty() || units.is_empty() {
            return 0.0;
        }
        let filled: usize = self.ranks.iter().map(|row| units.iter().filter(|&&u| row[u] > 0).count()).sum();
        filled as f64 / (self.ranks.len() * units.len()) as f64
    }

    /// Writes one row per instance: `instance` then one rank column per unit.
    pub fn write_csv<W: Write>(&self, out: W, unit_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["instance".to_string()];
        header.extend(unit_names.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.instances.iter().zip(&self.ranks) {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|r| r.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| FactError::io("<order matrix>", e))?;
        Ok(())
    }
}

/// Acquisition order of `policy` on the listed test rows. Under an
/// accuracy-fraction rule, ranks beyond the truncation step are dropped.
pub fn acquisition_order_matrix(
    bundle: &ModelBundle,
    test: &Dataset,
    rows: &[usize],
    policy: &dyn Policy,
    stopping: &StoppingRule,
) -> Result<(OrderMatrix, Simulation)> {
    let sim = simulate_instances(bundle, test, rows, policy, stopping)?;
    let matrix = OrderMatrix::from_trajectories(rows, &sim.trajectories, bundle.units().len(), sim.stop_step);
    Ok((matrix, sim))
}
