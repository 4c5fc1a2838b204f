//! Incremental acquisition: scoring unknown units by probability-weighted
//! prediction sensitivity per unit cost, the per-instance session state and
//! the greedy acquisition loop.

use std::cell::RefCell;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::codec::{quantize_into, MaskVector};
use crate::data::AcquisitionUnit;
use crate::error::{FactError, Result};
use crate::model::{argmax, ModelBundle};
use crate::nn::{sensitivity_from_jacobian, ForwardCache};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub unit: usize,
    pub score: Option<f64>,
    /// Normalized values written for the unit's members, in member order.
    pub values: Vec<f64>,
    pub cost: f64,
}

/// State of one instance being acquired.
///
/// Unknown features hold zero. `total_cost` counts only units acquired
/// after the session started; units known initially are free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSession {
    x: Vec<f64>,
    known: MaskVector,
    initial: MaskVector,
    total_cost: f64,
    history: Vec<HistoryEntry>,
    prediction: Vec<f64>,
}

impl AcquisitionSession {
    /// Session with every feature unknown.
    pub fn empty(bundle: &ModelBundle) -> Result<Self> {
        let d = bundle.n_features();
        Self::from_mask(bundle, vec![0.0; d], MaskVector::all_unknown(d))
    }

    /// Session starting from known values `x` under `k0`. Every unit must be
    /// entirely known or entirely unknown.
    pub fn from_mask(bundle: &ModelBundle, mut x: Vec<f64>, k0: MaskVector) -> Result<Self> {
        let d = bundle.n_features();
        if x.len() != d || k0.len() != d {
            return Err(FactError::DimensionMismatch {
                expected: d,
                actual: x.len().min(k0.len()),
            });
        }
        for unit in bundle.units().iter() {
            let known = unit.members.iter().filter(|&&m| k0.is_known(m)).count();
            if known != 0 && known != unit.members.len() {
                return Err(FactError::InvalidParameter(format!(
                    "unit {:?} is only partially known",
                    unit.name
                )));
            }
        }
        for (j, v) in x.iter_mut().enumerate() {
            if !k0.is_known(j) {
                *v = 0.0;
            }
        }
        let prediction = bundle.predict(&x, &k0)?;
        Ok(Self {
            x,
            initial: k0.clone(),
            known: k0,
            total_cost: 0.0,
            history: Vec::new(),
            prediction,
        })
    }

    /// Session with the given units already known, as `(unit, values)`.
    pub fn with_known_units(bundle: &ModelBundle, initial: &[(usize, Vec<f64>)]) -> Result<Self> {
        let d = bundle.n_features();
        let mut x = vec![0.0; d];
        let mut k0 = MaskVector::all_unknown(d);
        for (unit_id, values) in initial {
            let unit = bundle.units().get(*unit_id).ok_or(FactError::UnknownUnit(*unit_id))?;
            if unit.members.iter().any(|&m| k0.is_known(m)) {
                return Err(FactError::AlreadyKnown(*unit_id));
            }
            write_values(bundle, unit, values, &mut x)?;
            for &m in &unit.members {
                k0.set_known(m);
            }
        }
        Self::from_mask(bundle, x, k0)
    }

    /// Rebuilds a session by re-applying `history` on top of the initial state.
    pub fn replay(bundle: &ModelBundle, x0: Vec<f64>, k0: MaskVector, history: &[HistoryEntry]) -> Result<Self> {
        let mut s = Self::from_mask(bundle, x0, k0)?;
        for h in history {
            s.acquire(bundle, h.unit, &h.values, h.score)?;
        }
        Ok(s)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn known(&self) -> &MaskVector {
        &self.known
    }

    pub fn initial(&self) -> &MaskVector {
        &self.initial
    }

    /// Feature values at session start (zeros at unknowns).
    pub fn initial_values(&self) -> Vec<f64> {
        self.x
            .iter()
            .enumerate()
            .map(|(j, &v)| if self.initial.is_known(j) { v } else { 0.0 })
            .collect()
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn prediction(&self) -> &[f64] {
        &self.prediction
    }

    pub fn predicted_class(&self) -> usize {
        argmax(&self.prediction)
    }

    pub fn top_probability(&self) -> f64 {
        self.prediction[self.predicted_class()]
    }

    pub fn step(&self) -> usize {
        self.history.len()
    }

    pub fn is_unit_known(&self, unit: &AcquisitionUnit) -> bool {
        self.known.is_known(unit.members[0])
    }

    pub fn unknown_units(&self, bundle: &ModelBundle) -> Vec<usize> {
        bundle
            .units()
            .iter()
            .enumerate()
            .filter(|(_, u)| !self.is_unit_known(u))
            .map(|(i, _)| i)
            .collect()
    }

    /// Reveals one unit with normalized `values` (one per member), adds its
    /// cost and refreshes the prediction.
    pub fn acquire(&mut self, bundle: &ModelBundle, unit_id: usize, values: &[f64], score: Option<f64>) -> Result<()> {
        let unit = bundle.units().get(unit_id).ok_or(FactError::UnknownUnit(unit_id))?;
        if self.is_unit_known(unit) {
            return Err(FactError::AlreadyKnown(unit_id));
        }
        let mut x = self.x.clone();
        write_values(bundle, unit, values, &mut x)?;
        let mut known = self.known.clone();
        for &m in &unit.members {
            known.set_known(m);
        }
        let prediction = bundle.predict(&x, &known)?;
        self.x = x;
        self.known = known;
        self.prediction = prediction;
        self.total_cost += unit.cost;
        self.history.push(HistoryEntry {
            step: self.history.len() + 1,
            unit: unit_id,
            score,
            values: values.to_vec(),
            cost: unit.cost,
        });
        Ok(())
    }
}

fn write_values(bundle: &ModelBundle, unit: &AcquisitionUnit, values: &[f64], x: &mut [f64]) -> Result<()> {
    if values.len() != unit.members.len() {
        return Err(FactError::DimensionMismatch {
            expected: unit.members.len(),
            actual: values.len(),
        });
    }
    let max = crate::codec::max_representable(bundle.bits());
    for (&m, &v) in unit.members.iter().zip(values) {
        if !(0.0..=max).contains(&v) {
            return Err(FactError::OutOfRange {
                feature: m,
                value: v,
                max,
            });
        }
        x[m] = v;
    }
    Ok(())
}

/// Score of one unknown unit: `numerator / cost`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionScore {
    pub unit: usize,
    pub numerator: f64,
    pub cost: f64,
    pub score: f64,
}

/// Scores every unknown unit of the session.
///
/// The predictor's input Jacobian at the current binary input gives, per
/// bit, the summed absolute derivative of all class probabilities; the
/// frozen autoencoder gives the probability of each bit being set. A
/// feature's numerator is the sum over its bits of their product; a group
/// sums over its members.
pub fn score_features(bundle: &ModelBundle, session: &AcquisitionSession) -> Result<Vec<AcquisitionScore>> {
    let unknown = session.unknown_units(bundle);
    if unknown.is_empty() {
        return Err(FactError::NoUnknownFeatures);
    }
    SCRATCH.with(|cell| {
        let mut slot = cell.borrow_mut();
        let ws = match slot.as_mut() {
            Some(ws) if ws.fits(bundle) => ws,
            _ => slot.insert(Workspace::new(bundle)),
        };
        ws.score(bundle, session, &unknown)
    })
}

/// Reusable buffers for scoring, one per thread.
struct Workspace {
    input: Vec<f64>,
    columns: Vec<bool>,
    wanted: Vec<usize>,
    predictor: ForwardCache,
    autoencoder: ForwardCache,
}

thread_local! {
    static SCRATCH: RefCell<Option<Workspace>> = const { RefCell::new(None) };
}

impl Workspace {
    fn new(bundle: &ModelBundle) -> Self {
        let width = bundle.architecture().input_width();
        Self {
            input: vec![0.0; width],
            columns: vec![false; width],
            wanted: Vec::with_capacity(width),
            predictor: ForwardCache::for_network(&bundle.predictor),
            autoencoder: ForwardCache::for_network(&bundle.autoencoder),
        }
    }

    fn fits(&self, bundle: &ModelBundle) -> bool {
        self.input.len() == bundle.architecture().input_width()
            && self.predictor.matches(&bundle.predictor)
            && self.autoencoder.matches(&bundle.autoencoder)
    }

    fn score(&mut self, bundle: &ModelBundle, session: &AcquisitionSession, unknown: &[usize]) -> Result<Vec<AcquisitionScore>> {
        let bits = bundle.bits();
        // session values were range-checked when written
        quantize_into(session.x(), session.known(), bits, &mut self.input);
        self.wanted.clear();
        for (j, chunk) in self.columns.chunks_exact_mut(bits).enumerate() {
            let unknown = !session.known().is_known(j);
            chunk.fill(unknown);
            if unknown {
                self.wanted.extend(j * bits..(j + 1) * bits);
            }
        }
        bundle.predictor.forward_into(&self.input, &mut self.predictor);
        let sensitivity =
            sensitivity_from_jacobian(&bundle.predictor.input_jacobian(&self.predictor, Some(&self.columns)));
        bundle
            .autoencoder
            .forward_selected_into(&self.input, &mut self.autoencoder, &self.wanted)?;
        let probabilities = self.autoencoder.output();
        Ok(unknown
            .iter()
            .map(|&u| {
                let unit = bundle.units().get(u).expect("unit ids come from the bundle");
                let numerator: f64 = unit
                    .members
                    .iter()
                    .flat_map(|&j| j * bits..(j + 1) * bits)
                    .map(|k| sensitivity[k] * probabilities[k])
                    .sum();
                AcquisitionScore {
                    unit: u,
                    numerator,
                    cost: unit.cost,
                    score: numerator / unit.cost,
                }
            })
            .collect())
    }
}

/// Highest-scoring unit; the lowest unit id wins ties.
pub fn select_next(scores: &[AcquisitionScore]) -> Result<usize> {
    let mut best: Option<&AcquisitionScore> = None;
    for s in scores {
        best = match best {
            Some(b) if s.score > b.score || (s.score == b.score && s.unit < b.unit) => Some(s),
            Some(b) => Some(b),
            None => Some(s),
        };
    }
    best.map(|s| s.unit).ok_or(FactError::NoUnknownFeatures)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub unit: usize,
    pub score: Option<f64>,
}

/// A rule choosing the next unit to acquire for a session.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    /// `instance` identifies the test instance, letting stochastic policies
    /// stay deterministic per instance.
    fn select(&self, bundle: &ModelBundle, session: &AcquisitionSession, instance: usize) -> Result<Selection>;
}

/// The sensitivity-per-cost criterion.
#[derive(Debug, Clone, Copy, Default)]
pub struct FactPolicy;

impl Policy for FactPolicy {
    fn name(&self) -> &str {
        "fact"
    }

    fn select(&self, bundle: &ModelBundle, session: &AcquisitionSession, _instance: usize) -> Result<Selection> {
        let scores = score_features(bundle, session)?;
        let unit = select_next(&scores)?;
        let score = scores.iter().find(|s| s.unit == unit).map(|s| s.score);
        Ok(Selection { unit, score })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum StoppingRule {
    /// Stop before an acquisition that would exceed this total cost.
    Budget(f64),
    /// Stop once the top class probability reaches this value.
    Confidence(f64),
    /// Acquire everything.
    Exhaustion,
    /// Acquire everything per instance; the evaluation harness truncates at
    /// the first step whose accuracy reaches this fraction of the maximum.
    AccuracyFraction(f64),
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StoppingRule::Budget(b) => b >= 0.0 && !b.is_nan(),
            StoppingRule::Confidence(c) => c > 0.0 && c <= 1.0,
            StoppingRule::Exhaustion => true,
            StoppingRule::AccuracyFraction(f) => f > 0.0 && f <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(FactError::InvalidParameter(format!("invalid stopping rule {self:?}")))
        }
    }
}

/// Source of true values for one instance.
pub trait InstanceOracle {
    /// Normalized values of the unit's members, in member order.
    fn reveal(&self, unit: &AcquisitionUnit) -> Result<Vec<f64>>;
}

/// Oracle over a complete normalized feature row.
#[derive(Debug, Clone, Copy)]
pub struct RowOracle<'a>(pub &'a [f64]);

impl InstanceOracle for RowOracle<'_> {
    fn reveal(&self, unit: &AcquisitionUnit) -> Result<Vec<f64>> {
        unit.members
            .iter()
            .map(|&m| self.0.get(m).copied().ok_or(FactError::UnknownUnit(m)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub unit: Option<usize>,
    pub score: Option<f64>,
    pub cost: f64,
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
    pub top_probability: f64,
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    /// Units in acquisition order.
    pub fn acquired_units(&self) -> Vec<usize> {
        self.points.iter().filter_map(|p| p.unit).collect()
    }

    /// Writes `step,id,score,cost_so_far,predicted_class,top_probability,correct`.
    pub fn write_csv<W: Write>(&self, out: W, unit_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "id", "score", "cost_so_far", "predicted_class", "top_probability", "correct"])?;
        for p in &self.points {
            w.write_record([
                p.step.to_string(),
                p.unit.map(|u| unit_names[u].clone()).unwrap_or_default(),
                p.score.map(|s| s.to_string()).unwrap_or_default(),
                p.cost.to_string(),
                p.predicted_class.to_string(),
                p.top_probability.to_string(),
                p.correct.map(|c| c.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| FactError::io("<trajectory>", e))?;
        Ok(())
    }
}

fn point(session: &AcquisitionSession, unit: Option<usize>, score: Option<f64>, label: Option<usize>) -> TrajectoryPoint {
    let predicted = session.predicted_class();
    TrajectoryPoint {
        step: session.step(),
        unit,
        score,
        cost: session.total_cost(),
        probabilities: session.prediction().to_vec(),
        predicted_class: predicted,
        top_probability: session.top_probability(),
        correct: label.map(|l| l == predicted),
    }
}

/// Runs `policy` on one instance from the all-unknown state until the
/// stopping rule fires or nothing is left. The first point is the prior
/// prediction at cost zero.
pub fn run_policy(
    bundle: &ModelBundle,
    oracle: &dyn InstanceOracle,
    label: Option<usize>,
    policy: &dyn Policy,
    stopping: &StoppingRule,
    instance: usize,
) -> Result<Trajectory> {
    let session = AcquisitionSession::empty(bundle)?;
    run_policy_from(bundle, session, oracle, label, policy, stopping, instance)
}

/// Like [`run_policy`] but starting from an existing session.
pub fn run_policy_from(
    bundle: &ModelBundle,
    mut session: AcquisitionSession,
    oracle: &dyn InstanceOracle,
    label: Option<usize>,
    policy: &dyn Policy,
    stopping: &StoppingRule,
    instance: usize,
) -> Result<Trajectory> {
    stopping.validate()?;
    let mut points = vec![point(&session, None, None, label)];
    loop {
        if session.unknown_units(bundle).is_empty() {
            break;
        }
        if let StoppingRule::Confidence(c) = *stopping {
            if session.top_probability() >= c {
                break;
            }
        }
        let sel = policy.select(bundle, &session, instance)?;
        let unit = bundle.units().get(sel.unit).ok_or(FactError::UnknownUnit(sel.unit))?;
        if let StoppingRule::Budget(b) = *stopping {
            if session.total_cost() + unit.cost > b {
                break;
            }
        }
        let values = oracle.reveal(unit)?;
        session.acquire(bundle, sel.unit, &values, sel.score)?;
        points.push(point(&session, Some(sel.unit), sel.score, label));
    }
    Ok(Trajectory { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::quantize;
    use crate::model::BundleManifest;

    fn score(unit: usize, s: f64) -> AcquisitionScore {
        AcquisitionScore {
            unit,
            numerator: s,
            cost: 1.0,
            score: s,
        }
    }

    #[test]
    fn select_picks_maximum() {
        assert_eq!(select_next(&[score(0, 0.3), score(1, 0.7), score(2, 0.1)]).unwrap(), 1);
    }

    #[test]
    fn select_breaks_ties_by_lowest_id() {
        assert_eq!(select_next(&[score(0, 0.5), score(1, 0.5)]).unwrap(), 0);
        assert_eq!(select_next(&[score(4, 0.5), score(2, 0.5)]).unwrap(), 2);
    }

    #[test]
    fn select_single_and_empty() {
        assert_eq!(select_next(&[score(5, 0.0)]).unwrap(), 5);
        assert!(matches!(select_next(&[]), Err(FactError::NoUnknownFeatures)));
    }

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::Budget(0.0).validate().is_ok());
        assert!(StoppingRule::Budget(-1.0).validate().is_err());
        assert!(StoppingRule::Confidence(1.5).validate().is_err());
        assert!(StoppingRule::AccuracyFraction(0.95).validate().is_ok());
    }

    use crate::data::AcquisitionUnits;
    use crate::model::ArchitectureSpec;

    fn bundle(costs: &[f64], seed: u64) -> ModelBundle {
        let arch = ArchitectureSpec {
            n_features: costs.len(),
            bits: 4,
            encoder: vec![6],
            predictor: vec![5],
            n_classes: 3,
        };
        ModelBundle::random(&arch, AcquisitionUnits::singletons(costs).unwrap(), seed).unwrap()
    }

    #[test]
    fn doubling_cost_halves_score() {
        let b = bundle(&[1.0, 1.0, 1.0], 1);
        let doubled = ModelBundle {
            manifest: BundleManifest {
                units: AcquisitionUnits::singletons(&[2.0, 1.0, 1.0]).unwrap(),
                ..b.manifest.clone()
            },
            ..b.clone()
        };
        let s = AcquisitionSession::empty(&b).unwrap();
        let one = score_features(&b, &s).unwrap();
        let two = score_features(&doubled, &s).unwrap();
        assert_eq!(one[0].numerator, two[0].numerator);
        assert!((one[0].score - 2.0 * two[0].score).abs() < 1e-15);
        assert_eq!(one[1].score, two[1].score);
    }

    #[test]
    fn scores_match_finite_difference_recomputation() {
        let b = bundle(&[1.0, 2.0, 3.0, 0.5], 4);
        let mut s = AcquisitionSession::empty(&b).unwrap();
        s.acquire(&b, 1, &[0.625], None).unwrap();
        let scores = score_features(&b, &s).unwrap();
        assert_eq!(scores.iter().map(|a| a.unit).collect::<Vec<_>>(), vec![0, 2, 3]);

        let bits = b.bits();
        let input = quantize(s.x(), s.known(), bits).unwrap();
        let probs = b.autoencoder.predict(input.as_slice()).unwrap();
        let h = 1e-6;
        for a in &scores {
            let j = a.unit;
            let mut numerator = 0.0;
            for bit in 0..bits {
                let k = j * bits + bit;
                let mut plus = input.as_slice().to_vec();
                let mut minus = plus.clone();
                plus[k] += h;
                minus[k] -= h;
                let yp = b.predictor.predict(&plus).unwrap();
                let ym = b.predictor.predict(&minus).unwrap();
                let sens: f64 = yp.iter().zip(&ym).map(|(p, m)| ((p - m) / (2.0 * h)).abs()).sum();
                numerator += sens * probs[k];
            }
            let expected = numerator / b.units().get(j).unwrap().cost;
            assert!((a.score - expected).abs() <= 1e-6 * expected.abs().max(1e-3), "{} vs {}", a.score, expected);
        }
    }

    #[test]
    fn acquired_costs_add_up() {
        let b = bundle(&[3.0, 5.0, 1.0], 2);
        let mut s = AcquisitionSession::empty(&b).unwrap();
        s.acquire(&b, 0, &[0.5], None).unwrap();
        s.acquire(&b, 1, &[0.25], None).unwrap();
        assert_eq!(s.total_cost(), 8.0);
    }

    #[test]
    fn acquire_flips_exactly_the_unit_bits() {
        let b = bundle(&[1.0; 5], 2);
        let mut s = AcquisitionSession::empty(&b).unwrap();
        let before = s.known().clone();
        s.acquire(&b, 3, &[0.75], None).unwrap();
        let changed: Vec<usize> = (0..5).filter(|&j| before.is_known(j) != s.known().is_known(j)).collect();
        assert_eq!(changed, vec![3]);
        assert_eq!(s.x()[3], 0.75);
    }

    #[test]
    fn acquiring_known_or_missing_unit_fails() {
        let b = bundle(&[1.0; 3], 2);
        let mut s = AcquisitionSession::empty(&b).unwrap();
        s.acquire(&b, 2, &[0.5], None).unwrap();
        assert!(matches!(s.acquire(&b, 2, &[0.5], None), Err(FactError::AlreadyKnown(2))));
        assert!(matches!(s.acquire(&b, 9, &[0.5], None), Err(FactError::UnknownUnit(9))));
        assert!(s.acquire(&b, 0, &[1.0], None).is_err());
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn known_units_never_scored() {
        let b = bundle(&[1.0; 4], 3);
        let s = AcquisitionSession::with_known_units(&b, &[(0, vec![0.1]), (2, vec![0.9])]).unwrap();
        let ids: Vec<usize> = score_features(&b, &s).unwrap().iter().map(|a| a.unit).collect();
        assert_eq!(ids, vec![1, 3]);
        assert_eq!(s.total_cost(), 0.0);
    }

    #[test]
    fn nothing_left_to_score() {
        let b = bundle(&[1.0; 2], 3);
        let s = AcquisitionSession::with_known_units(&b, &[(0, vec![0.1]), (1, vec![0.2])]).unwrap();
        assert!(matches!(score_features(&b, &s), Err(FactError::NoUnknownFeatures)));
    }

    #[test]
    fn exhaustion_visits_every_unit_once() {
        let b = bundle(&[1.0, 2.0, 4.0, 8.0], 5);
        let row = [0.1, 0.2, 0.3, 0.4];
        let t = run_policy(&b, &RowOracle(&row), Some(0), &FactPolicy, &StoppingRule::Exhaustion, 0).unwrap();
        assert_eq!(t.points.len(), 5);
        let mut units = t.acquired_units();
        units.sort_unstable();
        assert_eq!(units, vec![0, 1, 2, 3]);
        assert_eq!(t.points.last().unwrap().cost, 15.0);
    }

    #[test]
    fn zero_budget_keeps_only_prior() {
        let b = bundle(&[1.0, 2.0], 5);
        let t = run_policy(&b, &RowOracle(&[0.5, 0.5]), None, &FactPolicy, &StoppingRule::Budget(0.0), 0).unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.points[0].cost, 0.0);
        assert_eq!(t.points[0].correct, None);
    }

    #[test]
    fn replay_reproduces_session() {
        let b = bundle(&[1.0, 2.0, 3.0], 6);
        let mut s = AcquisitionSession::with_known_units(&b, &[(1, vec![0.5])]).unwrap();
        s.acquire(&b, 2, &[0.125], Some(0.3)).unwrap();
        s.acquire(&b, 0, &[0.875], None).unwrap();
        let r = AcquisitionSession::replay(&b, s.initial_values(), s.initial().clone(), s.history()).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let b = bundle(&[1.0, 2.0], 5);
        let t = run_policy(&b, &RowOracle(&[0.5, 0.5]), Some(1), &FactPolicy, &StoppingRule::Exhaustion, 0).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out, &["a".into(), "b".into()]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,id,score,cost_so_far,predicted_class,top_probability,correct");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,,,0,"));
    }
}
