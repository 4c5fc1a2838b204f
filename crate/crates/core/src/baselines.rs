//! Reference acquisition policies: uniformly random order, a static order
//! by mutual information with the label, and the exhaustive oracle that
//! substitutes histogram bin centers and measures the prediction change.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::acquire::{AcquisitionSession, Policy, Selection};
use crate::codec::{quantize_into, MaskVector};
use crate::data::{AcquisitionUnits, Dataset};
use crate::error::{FactError, Result};
use crate::model::{rng_stream, ModelBundle};
use crate::nn::ForwardCache;

/// Bins used to discretize features for mutual information.
pub const MI_BINS: usize = 10;
/// Bins of the marginal histogram used by the exhaustive oracle.
pub const HISTOGRAM_BINS: usize = 5;

/// Uniformly random acquisition order, fixed per (seed, instance).
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    seed: u64,
    name: String,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            name: "random".into(),
        }
    }

    /// The full permutation of unit ids used for `instance`.
    pub fn order(&self, n_units: usize, instance: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n_units).collect();
        order.shuffle(&mut rng_stream(self.seed, instance as u64));
        order
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&self, bundle: &ModelBundle, session: &AcquisitionSession, instance: usize) -> Result<Selection> {
        let units = bundle.units();
        self.order(units.len(), instance)
            .into_iter()
            .find(|&u| !session.is_unit_known(units.get(u).expect("permutation of unit ids")))
            .map(|unit| Selection { unit, score: None })
            .ok_or(FactError::NoUnknownFeatures)
    }
}

/// Bin index of each value under equal-frequency edges.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins).map(|k| sorted[(k * n / bins).min(n - 1)]).collect();
    edges.dedup();
    values.iter().map(|v| edges.partition_point(|e| e <= v)).collect()
}

/// Plug-in mutual information (nats) between discrete codes and labels.
pub fn discrete_mutual_information(codes: &[usize], labels: &[usize]) -> f64 {
    let n = codes.len();
    if n == 0 {
        return 0.0;
    }
    let nc = codes.iter().max().map_or(0, |m| m + 1);
    let nl = labels.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; nc * nl];
    let mut pc = vec![0usize; nc];
    let mut pl = vec![0usize; nl];
    for (&c, &l) in codes.iter().zip(labels) {
        joint[c * nl + l] += 1;
        pc[c] += 1;
        pl[l] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for c in 0..nc {
        for l in 0..nl {
            let count = joint[c * nl + l];
            if count == 0 {
                continue;
            }
            let pj = count as f64 / nf;
            mi += pj * (pj / ((pc[c] as f64 / nf) * (pl[l] as f64 / nf))).ln();
        }
    }
    mi.max(0.0)
}

/// MI between a continuous feature (discretized into equal-frequency bins)
/// and the labels.
pub fn feature_mutual_information(values: &[f64], labels: &[usize]) -> f64 {
    discrete_mutual_information(&equal_frequency_bins(values, MI_BINS), labels)
}

/// Fraction of label permutations whose MI is at least the observed MI
/// (with the usual +1 correction).
pub fn mi_permutation_p_value(values: &[f64], labels: &[usize], permutations: usize, seed: u64) -> f64 {
    let codes = equal_frequency_bins(values, MI_BINS);
    let observed = discrete_mutual_information(&codes, labels);
    let mut rng = rng_stream(seed, 0);
    let mut shuffled = labels.to_vec();
    let mut at_least = 0;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        if discrete_mutual_information(&codes, &shuffled) >= observed {
            at_least += 1;
        }
    }
    (at_least + 1) as f64 / (permutations + 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticEntry {
    pub unit: usize,
    pub mi: f64,
    pub cost: f64,
}

/// Context-free ranking of all units by mutual information with the label,
/// optionally divided by cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticOrder {
    pub entries: Vec<StaticEntry>,
    pub cost_normalized: bool,
}

impl StaticOrder {
    /// Key the order is sorted by.
    pub fn rank_key(&self, e: &StaticEntry) -> f64 {
        if self.cost_normalized {
            e.mi / e.cost
        } else {
            e.mi
        }
    }

    pub fn units(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.unit).collect()
    }

    /// Writes `rank,id,mi,cost`.
    pub fn write_csv<W: Write>(&self, out: W, units: &AcquisitionUnits) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "id", "mi", "cost"])?;
        for (rank, e) in self.entries.iter().enumerate() {
            let name = units.get(e.unit).map(|u| u.name.clone()).unwrap_or_default();
            w.write_record([(rank + 1).to_string(), name, e.mi.to_string(), e.cost.to_string()])?;
        }
        w.flush().map_err(|e| FactError::io("<static order>", e))?;
        Ok(())
    }
}

/// MI ranking over the units of `train`; a group scores the best of its
/// members. Ties keep the lower unit id first.
pub fn static_mi_order(train: &Dataset, units: &AcquisitionUnits, cost_normalized: bool) -> Result<StaticOrder> {
    if train.n_instances() == 0 {
        return Err(FactError::EmptySplit("train"));
    }
    let per_feature: Vec<f64> = (0..train.n_features())
        .map(|j| feature_mutual_information(&train.column(j), train.targets()))
        .collect();
    let mut entries: Vec<StaticEntry> = units
        .iter()
        .enumerate()
        .map(|(u, unit)| StaticEntry {
            unit: u,
            mi: unit.members.iter().map(|&m| per_feature[m]).fold(0.0, f64::max),
            cost: unit.cost,
        })
        .collect();
    let key = |e: &StaticEntry| if cost_normalized { e.mi / e.cost } else { e.mi };
    entries.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.unit.cmp(&b.unit)));
    let order = StaticOrder {
        entries,
        cost_normalized,
    };
    Ok(order)
}

/// Acquires units in a fixed precomputed order.
#[derive(Debug, Clone)]
pub struct StaticPolicy {
    order: Vec<usize>,
    name: String,
}

impl StaticPolicy {
    pub fn new(order: &StaticOrder) -> Self {
        Self {
            order: order.units(),
            name: if order.cost_normalized { "static_cost" } else { "static" }.into(),
        }
    }
}

impl Policy for StaticPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&self, bundle: &ModelBundle, session: &AcquisitionSession, _instance: usize) -> Result<Selection> {
        let units = bundle.units();
        self.order
            .iter()
            .copied()
            .find(|&u| units.get(u).is_some_and(|unit| !session.is_unit_known(unit)))
            .map(|unit| Selection { unit, score: None })
            .ok_or(FactError::NoUnknownFeatures)
    }
}

/// Marginal 5-bin histogram of every feature over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramModel {
    pub probabilities: Vec<[f64; HISTOGRAM_BINS]>,
}

impl HistogramModel {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.n_instances() == 0 {
            return Err(FactError::EmptySplit("train"));
        }
        let mut probabilities = vec![[0.0; HISTOGRAM_BINS]; train.n_features()];
        for row in train.rows() {
            for (p, &v) in probabilities.iter_mut().zip(row) {
                p[Self::bin_of(v)] += 1.0;
            }
        }
        let n = train.n_instances() as f64;
        for p in &mut probabilities {
            p.iter_mut().for_each(|c| *c /= n);
        }
        Ok(Self { probabilities })
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            probabilities: vec![[1.0 / HISTOGRAM_BINS as f64; HISTOGRAM_BINS]; d],
        }
    }

    pub fn bin_of(v: f64) -> usize {
        ((v * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
    }

    /// Center of bin `m`: `(m + 0.5) / 5`.
    pub fn center(m: usize) -> f64 {
        (m as f64 + 0.5) / HISTOGRAM_BINS as f64
    }
}

/// Exhaustive sensitivity oracle: for each unknown feature, the
/// histogram-weighted L1 change of the class probabilities when that
/// feature is set to each bin center, per unit cost.
#[derive(Debug, Clone)]
pub struct ExhaustivePolicy {
    histograms: HistogramModel,
}

impl ExhaustivePolicy {
    pub fn new(histograms: HistogramModel) -> Self {
        Self { histograms }
    }

    /// Utility (before dividing by cost) of every unknown unit.
    pub fn utilities(&self, bundle: &ModelBundle, session: &AcquisitionSession) -> Result<Vec<(usize, f64)>> {
        let bits = bundle.bits();
        let d = bundle.n_features();
        let net = &bundle.predictor;
        let mut cache = ForwardCache::for_network(net);
        let mut input = vec![0.0; d * bits];
        let base = session.prediction().to_vec();
        let mut x = session.x().to_vec();
        let mut mask: MaskVector = session.known().clone();
        let mut out = Vec::new();
        for u in session.unknown_units(bundle) {
            let unit = bundle.units().get(u).expect("unit ids come from the bundle");
            let mut utility = 0.0;
            for &j in &unit.members {
                mask.set_known(j);
                for m in 0..HISTOGRAM_BINS {
                    x[j] = HistogramModel::center(m);
                    quantize_into(&x, &mask, bits, &mut input);
                    net.forward_into(&input, &mut cache);
                    let change: f64 = cache.output().iter().zip(&base).map(|(a, b)| (a - b).abs()).sum();
                    utility += self.histograms.probabilities[j][m] * change;
                }
                x[j] = 0.0;
                mask.set_unknown(j);
            }
            out.push((u, utility));
        }
        Ok(out)
    }
}

impl Policy for ExhaustivePolicy {
    fn name(&self) -> &str {
        "exhaustive"
    }

    fn select(&self, bundle: &ModelBundle, session: &AcquisitionSession, _instance: usize) -> Result<Selection> {
        let mut best: Option<(usize, f64)> = None;
        for (u, utility) in self.utilities(bundle, session)? {
            let score = utility / bundle.units().get(u).expect("valid unit").cost;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((u, score));
            }
        }
        best.map(|(unit, s)| Selection { unit, score: Some(s) })
            .ok_or(FactError::NoUnknownFeatures)
    }
}
