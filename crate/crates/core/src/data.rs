//! Dataset ingestion, min-max normalization, seeded splits, acquisition
//! costs and the clustered synthetic benchmark generator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{max_representable, DEFAULT_BITS};
use crate::error::{FactError, Result};

/// A set of features that is acquired (and paid for) as one unit, such as the
/// one-hot columns expanded from a single categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub id: String,
    pub members: Vec<usize>,
}

/// Labeled feature matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Vec<f64>,
    n_features: usize,
    targets: Vec<usize>,
    n_classes: usize,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        rows: Vec<Vec<f64>>,
        targets: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if rows.len() != targets.len() {
            return Err(FactError::DimensionMismatch {
                expected: rows.len(),
                actual: targets.len(),
            });
        }
        let mut features = Vec::with_capacity(rows.len() * d);
        for row in &rows {
            if row.len() != d {
                return Err(FactError::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(FactError::NonFinite("dataset row"));
            }
            features.extend_from_slice(row);
        }
        let n_classes = class_names.len();
        if let Some(&label) = targets.iter().find(|&&t| t >= n_classes) {
            return Err(FactError::LabelOutOfRange {
                label,
                classes: n_classes,
            });
        }
        Ok(Self {
            name: name.into(),
            features,
            n_features: d,
            targets,
            n_classes,
            feature_names,
            class_names,
            groups: Vec::new(),
        })
    }

    /// Attaches acquisition groups after checking they are disjoint and in range.
    pub fn with_groups(mut self, groups: Vec<FeatureGroup>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for g in &groups {
            if g.members.is_empty() {
                return Err(FactError::InvalidParameter(format!(
                    "group {:?} has no members",
                    g.id
                )));
            }
            for &m in &g.members {
                if m >= self.n_features {
                    return Err(FactError::UnknownUnit(m));
                }
                if !seen.insert(m) {
                    return Err(FactError::InvalidParameter(format!(
                        "feature {} belongs to more than one group",
                        self.feature_names[m]
                    )));
                }
            }
        }
        self.groups = groups;
        Ok(self)
    }

    pub fn n_instances(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features.max(1))
    }

    pub fn target(&self, i: usize) -> usize {
        self.targets[i]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Group membership per feature, `None` for features acquired individually.
    pub fn group_map(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.n_features];
        for (g, group) in self.groups.iter().enumerate() {
            for &m in &group.members {
                map[m] = Some(g);
            }
        }
        map
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            name: self.name.clone(),
            features,
            n_features: self.n_features,
            targets,
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            groups: self.groups.clone(),
        }
    }

    /// Hex SHA-256 over shape, names, values and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_instances() as u64).to_le_bytes());
        h.update((self.n_features as u64).to_le_bytes());
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        for v in &self.features {
            h.update(v.to_le_bytes());
        }
        for &t in &self.targets {
            h.update((t as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes the dataset as a CSV with the label in a final `target_column`.
    pub fn write_csv(&self, path: &Path, target_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(target_column);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_features + 1);
        for (i, row) in self.rows().enumerate() {
            record.clear();
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(self.class_names[self.targets[i]].clone());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| FactError::io(path, e))?;
        Ok(())
    }
}

/// Acquisition cost per feature, and per group for grouped features.
///
/// `group_costs[g]` is paid once for all members of `Dataset::groups[g]`;
/// the individual costs of grouped features are not used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSchedule {
    pub feature_costs: Vec<f64>,
    pub group_costs: Vec<f64>,
}

impl CostSchedule {
    pub fn uniform(d: usize) -> Self {
        Self {
            feature_costs: vec![1.0; d],
            group_costs: Vec::new(),
        }
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.feature_costs.len() != ds.n_features() {
            return Err(FactError::DimensionMismatch {
                expected: ds.n_features(),
                actual: self.feature_costs.len(),
            });
        }
        if self.group_costs.len() != ds.groups.len() {
            return Err(FactError::DimensionMismatch {
                expected: ds.groups.len(),
                actual: self.group_costs.len(),
            });
        }
        for &c in self.feature_costs.iter().chain(&self.group_costs) {
            if !(c > 0.0 && c.is_finite()) {
                return Err(FactError::InvalidParameter(format!(
                    "acquisition cost {c} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Same schedule with every cost multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            feature_costs: self.feature_costs.iter().map(|c| c * factor).collect(),
            group_costs: self.group_costs.iter().map(|c| c * factor).collect(),
        }
    }
}

/// One acquirable item: a single feature or a whole group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionUnit {
    pub name: String,
    pub members: Vec<usize>,
    pub cost: f64,
}

/// The acquirable units of a dataset, ordered by their lowest member index.
/// A unit's id is its position in this list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionUnits {
    units: Vec<AcquisitionUnit>,
    unit_of_feature: Vec<usize>,
}

impl AcquisitionUnits {
    pub fn new(ds: &Dataset, costs: &CostSchedule) -> Result<Self> {
        costs.validate(ds)?;
        let group_map = ds.group_map();
        let mut units = Vec::new();
        let mut unit_of_feature = vec![usize::MAX; ds.n_features()];
        for j in 0..ds.n_features() {
            if unit_of_feature[j] != usize::MAX {
                continue;
            }
            let id = units.len();
            match group_map[j] {
                Some(g) => {
                    let group = &ds.groups[g];
                    let mut members = group.members.clone();
                    members.sort_unstable();
                    for &m in &members {
                        unit_of_feature[m] = id;
                    }
                    units.push(AcquisitionUnit {
                        name: group.id.clone(),
                        members,
                        cost: costs.group_costs[g],
                    });
                }
                None => {
                    unit_of_feature[j] = id;
                    units.push(AcquisitionUnit {
                        name: ds.feature_names[j].clone(),
                        members: vec![j],
                        cost: costs.feature_costs[j],
                    });
                }
            }
        }
        Ok(Self {
            units,
            unit_of_feature,
        })
    }

    /// One unit per feature with the given costs, named `f0`, `f1`, ...
    pub fn singletons(costs: &[f64]) -> Result<Self> {
        if let Some(c) = costs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(FactError::InvalidParameter(format!("cost {c} must be positive")));
        }
        Ok(Self {
            units: costs
                .iter()
                .enumerate()
                .map(|(j, &cost)| AcquisitionUnit {
                    name: format!("f{j}"),
                    members: vec![j],
                    cost,
                })
                .collect(),
            unit_of_feature: (0..costs.len()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&AcquisitionUnit> {
        self.units.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AcquisitionUnit> {
        self.units.iter()
    }

    pub fn unit_of_feature(&self, j: usize) -> usize {
        self.unit_of_feature[j]
    }

    pub fn n_features(&self) -> usize {
        self.unit_of_feature.len()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.units.iter().position(|u| u.name == name)
    }

    /// Cost of acquiring every unit.
    pub fn total_cost(&self) -> f64 {
        self.units.iter().map(|u| u.cost).sum()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.cost).collect()
    }

    /// Same units with every cost multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for u in &mut out.units {
            u.cost *= factor;
        }
        out
    }
}

/// Per-feature min/max fitted on one split and applied to all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub bits: usize,
    pub computed_on: String,
}

impl NormalizationSpec {
    pub fn fit(source: &Dataset, computed_on: impl Into<String>, bits: usize) -> Result<Self> {
        if source.n_instances() == 0 {
            return Err(FactError::EmptySplit("normalization source"));
        }
        let d = source.n_features();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in source.rows() {
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Ok(Self {
            min,
            max,
            bits,
            computed_on: computed_on.into(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    /// Maps a raw value into `[0, 1 - 2^-bits]`, reporting whether it clamped.
    pub fn apply_value(&self, j: usize, raw: f64) -> (f64, bool) {
        let span = self.max[j] - self.min[j];
        let scaled = if span > 0.0 {
            (raw - self.min[j]) / span
        } else {
            0.0
        };
        let hi = max_representable(self.bits);
        let clamped = scaled.clamp(0.0, hi);
        // hitting the top of the range is expected, not an out-of-range input
        let out_of_range = !(0.0..=1.0).contains(&scaled);
        (clamped, out_of_range)
    }

    pub fn apply_row(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(j, &v)| self.apply_value(j, v).0)
            .collect()
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_features() != self.n_features() {
            return Err(FactError::DimensionMismatch {
                expected: self.n_features(),
                actual: ds.n_features(),
            });
        }
        let mut out = ds.clone();
        let d = out.n_features;
        for (i, v) in out.features.iter_mut().enumerate() {
            *v = self.apply_value(i % d, *v).0;
        }
        Ok(out)
    }
}

/// Fits normalization on `source` and applies it to `ds`.
pub fn normalize(ds: &Dataset, source: &Dataset, computed_on: &str) -> Result<(Dataset, NormalizationSpec)> {
    let spec = NormalizationSpec::fit(source, computed_on, DEFAULT_BITS)?;
    Ok((spec.apply(ds)?, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.15,
            validation_fraction: 0.15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Splits {
    /// Fits normalization on the training split and applies it to all three.
    pub fn normalized(&self, bits: usize) -> Result<(Splits, NormalizationSpec)> {
        let spec = NormalizationSpec::fit(&self.train, "train", bits)?;
        Ok((
            Splits {
                train: spec.apply(&self.train)?,
                validation: spec.apply(&self.validation)?,
                test: spec.apply(&self.test)?,
            },
            spec,
        ))
    }
}

/// Row indices of a seeded shuffle split as `(train, validation, test)`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let valid = |f: f64| f > 0.0 && f < 1.0;
    if !valid(spec.test_fraction)
        || !valid(spec.validation_fraction)
        || spec.test_fraction + spec.validation_fraction >= 1.0
    {
        return Err(FactError::InvalidParameter(format!(
            "split fractions {} / {} must lie in (0, 1) and sum below 1",
            spec.test_fraction, spec.validation_fraction
        )));
    }
    let n_test = (n as f64 * spec.test_fraction).round() as usize;
    let n_val = (n as f64 * spec.validation_fraction).round() as usize;
    if n_test == 0 {
        return Err(FactError::EmptySplit("test"));
    }
    if n_val == 0 {
        return Err(FactError::EmptySplit("validation"));
    }
    if n_test + n_val >= n {
        return Err(FactError::EmptySplit("train"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = order[..n_test].to_vec();
    let validation = order[n_test..n_test + n_val].to_vec();
    let train = order[n_test + n_val..].to_vec();
    Ok((train, validation, test))
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    let (train, validation, test) = split_indices(ds.n_instances(), spec)?;
    Ok(Splits {
        train: ds.subset(&train),
        validation: ds.subset(&validation),
        test: ds.subset(&test),
    })
}

/// JSON manifest describing costs, groups and categorical columns of a CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostManifest {
    #[serde(default)]
    pub costs: BTreeMap<String, f64>,
    #[serde(default)]
    pub groups: Vec<ManifestGroup>,
    /// Source columns to one-hot expand; each becomes one group named after
    /// the column, costed by `costs[column]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestGroup {
    pub id: GroupId,
    pub cost: f64,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupId {
    Number(i64),
    Name(String),
}

impl std::fmt::Display for GroupId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupId::Number(n) => write!(f, "{n}"),
            GroupId::Name(s) => f.write_str(s),
        }
    }
}

impl CostManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FactError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| FactError::io(path, e))
    }

    /// Manifest listing an individual cost for every feature of a schedule.
    pub fn from_schedule(ds: &Dataset, costs: &CostSchedule) -> Self {
        let grouped = ds.group_map();
        Self {
            costs: ds
                .feature_names
                .iter()
                .zip(&costs.feature_costs)
                .zip(&grouped)
                .filter(|(_, g)| g.is_none())
                .map(|((n, &c), _)| (n.clone(), c))
                .collect(),
            groups: ds
                .groups
                .iter()
                .zip(&costs.group_costs)
                .map(|(g, &cost)| ManifestGroup {
                    id: GroupId::Name(g.id.clone()),
                    cost,
                    members: g.members.iter().map(|&m| ds.feature_names[m].clone()).collect(),
                })
                .collect(),
            categorical: Vec::new(),
        }
    }
}

enum ColumnPlan {
    Numeric { source: usize },
    Categorical { source: usize, levels: Vec<String> },
}

fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    match numeric {
        Some(_) => labels.sort_by(|a, b| {
            let (x, y) = (a.trim().parse::<f64>().unwrap(), b.trim().parse::<f64>().unwrap());
            x.total_cmp(&y)
        }),
        None => labels.sort(),
    }
}

/// Reads a headed CSV. Features without a manifest cost default to 1.
pub fn load_csv(
    path: &Path,
    target_column: &str,
    manifest_path: Option<&Path>,
) -> Result<(Dataset, CostSchedule)> {
    if !path.exists() {
        return Err(FactError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
        ));
    }
    let manifest = match manifest_path {
        Some(p) => CostManifest::read(p)?,
        None => CostManifest::default(),
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| FactError::UnknownColumn(target_column.to_string()))?;
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;

    for c in &manifest.categorical {
        if !headers.contains(c) || c == target_column {
            return Err(FactError::ManifestColumn(c.clone()));
        }
    }

    let mut plans = Vec::new();
    for (source, name) in headers.iter().enumerate() {
        if source == target_idx {
            continue;
        }
        if manifest.categorical.contains(name) {
            let levels: BTreeSet<String> = records
                .iter()
                .map(|r| r.get(source).unwrap_or("").trim().to_string())
                .collect();
            plans.push(ColumnPlan::Categorical {
                source,
                levels: levels.into_iter().collect(),
            });
        } else {
            plans.push(ColumnPlan::Numeric { source });
        }
    }

    let mut feature_names = Vec::new();
    let mut groups = Vec::new();
    let mut group_costs = Vec::new();
    for plan in &plans {
        match plan {
            ColumnPlan::Numeric { source } => feature_names.push(headers[*source].clone()),
            ColumnPlan::Categorical { source, levels } => {
                let col = &headers[*source];
                let start = feature_names.len();
                feature_names.extend(levels.iter().map(|l| format!("{col}={l}")));
                groups.push(FeatureGroup {
                    id: col.clone(),
                    members: (start..feature_names.len()).collect(),
                });
                group_costs.push(manifest.costs.get(col).copied().unwrap_or(1.0));
            }
        }
    }

    let mut rows = Vec::with_capacity(records.len());
    let mut raw_labels = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != headers.len() {
            return Err(FactError::DimensionMismatch {
                expected: headers.len(),
                actual: rec.len(),
            });
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for plan in &plans {
            match plan {
                ColumnPlan::Numeric { source } => {
                    let cell = rec[*source].trim();
                    let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                        FactError::NonNumeric {
                            row: i + 1,
                            column: headers[*source].clone(),
                            value: cell.to_string(),
                        }
                    })?;
                    row.push(v);
                }
                ColumnPlan::Categorical { source, levels } => {
                    let cell = rec[*source].trim();
                    row.extend(levels.iter().map(|l| if l == cell { 1.0 } else { 0.0 }));
                }
            }
        }
        rows.push(row);
        raw_labels.push(rec[target_idx].trim().to_string());
    }

    let mut class_names: Vec<String> = raw_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    sort_labels(&mut class_names);
    let class_index: HashMap<&str, usize> = class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let targets = raw_labels.iter().map(|l| class_index[l.as_str()]).collect();

    let index_of: HashMap<&str, usize> = feature_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    for mg in &manifest.groups {
        let members = mg
            .members
            .iter()
            .map(|m| index_of.get(m.as_str()).copied().ok_or_else(|| FactError::ManifestColumn(m.clone())))
            .collect::<Result<Vec<_>>>()?;
        groups.push(FeatureGroup {
            id: mg.id.to_string(),
            members,
        });
        group_costs.push(mg.cost);
    }

    let mut feature_costs = vec![1.0; feature_names.len()];
    for (name, &cost) in &manifest.costs {
        match index_of.get(name.as_str()) {
            Some(&j) => feature_costs[j] = cost,
            None if manifest.categorical.contains(name) => {}
            None => return Err(FactError::ManifestColumn(name.clone())),
        }
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = Dataset::new(name, rows, targets, feature_names, class_names)?.with_groups(groups)?;
    let costs = CostSchedule {
        feature_costs,
        group_costs,
    };
    costs.validate(&ds)?;
    Ok((ds, costs))
}

/// Parameters of the clustered benchmark: Gaussian clusters around uniform
/// centers, each cluster labeled by a coin flip, padded with pure-noise
/// columns. Costs rise 1..=k within the informative block and again within
/// the noise block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_centers: usize,
    pub informative: usize,
    pub noise: usize,
    pub points_per_center: usize,
    pub n_classes: usize,
    /// Variance of the per-dimension offset around each center.
    pub cluster_variance: f64,
    /// Centers are drawn uniformly from `[lo, hi)` in every dimension.
    pub center_range: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_centers: 16,
            informative: 32,
            noise: 32,
            points_per_center: 1000,
            n_classes: 2,
            cluster_variance: 0.25,
            center_range: (-2.0, 2.0),
        }
    }
}

impl SynthConfig {
    pub fn generate(&self, seed: u64) -> Result<(Dataset, CostSchedule)> {
        let (lo, hi) = self.center_range;
        if lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(FactError::InvalidParameter(format!("empty center range [{lo}, {hi})")));
        }
        if self.n_centers == 0 || self.points_per_center == 0 || self.n_classes < 2 {
            return Err(FactError::InvalidParameter(
                "synthetic data needs centers, points and at least two classes".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f64>> = (0..self.n_centers)
            .map(|_| (0..self.informative).map(|_| rng.random_range(lo..hi)).collect())
            .collect();
        let mut labels: Vec<usize> = (0..self.n_centers)
            .map(|_| rng.random_range(0..self.n_classes))
            .collect();
        // a single-class draw is useless as a benchmark
        if labels.iter().all(|&l| l == labels[0]) {
            labels[self.n_centers - 1] = (labels[0] + 1) % self.n_classes;
        }
        let spread = Normal::new(0.0, self.cluster_variance.sqrt())
            .map_err(|e| FactError::InvalidParameter(e.to_string()))?;
        let noise = Normal::new(0.0, 1.0).expect("standard normal");

        let d = self.informative + self.noise;
        let mut rows = Vec::with_capacity(self.n_centers * self.points_per_center);
        let mut targets = Vec::with_capacity(rows.capacity());
        for (center, &label) in centers.iter().zip(&labels) {
            for _ in 0..self.points_per_center {
                let mut row = Vec::with_capacity(d);
                row.extend(center.iter().map(|&c| c + spread.sample(&mut rng)));
                row.extend((0..self.noise).map(|_| noise.sample(&mut rng)));
                rows.push(row);
                targets.push(label);
            }
        }
        let feature_names = (0..d).map(|j| format!("f{j}")).collect();
        let class_names = (0..self.n_classes).map(|c| c.to_string()).collect();
        let ds = Dataset::new("synthesized", rows, targets, feature_names, class_names)?;
        let feature_costs = (0..self.informative)
            .map(|i| (i + 1) as f64)
            .chain((0..self.noise).map(|i| (i + 1) as f64))
            .collect();
        Ok((
            ds,
            CostSchedule {
                feature_costs,
                group_costs: Vec::new(),
            },
        ))
    }
}

/// The 16000 x 64, two-class clustered benchmark with its cost schedule.
pub fn generate_synthesized(seed: u64) -> (Dataset, CostSchedule) {
    SynthConfig::default()
        .generate(seed)
        .expect("default synthetic configuration is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        p
    }

    fn toy(rows: Vec<Vec<f64>>) -> Dataset {
        let d = rows[0].len();
        let n = rows.len();
        Dataset::new(
            "toy",
            rows,
            vec![0; n],
            (0..d).map(|j| format!("f{j}")).collect(),
            vec!["a".into()],
        )
        .unwrap()
    }

    #[test]
    fn loads_plain_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "t.csv",
            "a,b,c,label\n1,2,3,x\n4,5,6,y\n7,8,9,x\n0,0,0,z\n",
        );
        let (ds, costs) = load_csv(&p, "label", None).unwrap();
        assert_eq!(ds.n_instances(), 4);
        assert_eq!(ds.n_features(), 3);
        assert_eq!(ds.n_classes(), 3);
        assert_eq!(ds.row(1), &[4.0, 5.0, 6.0]);
        assert_eq!(ds.targets(), &[0, 1, 0, 2]);
        assert_eq!(costs.feature_costs, vec![1.0; 3]);
    }

    #[test]
    fn expands_categorical_column_into_one_group() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "t.csv",
            "age,color,label\n30,red,0\n40,green,1\n50,blue,0\n",
        );
        let m = write_file(
            dir.path(),
            "m.json",
            r#"{"costs": {"age": 1.0, "color": 2.5}, "categorical": ["color"]}"#,
        );
        let (ds, costs) = load_csv(&p, "label", Some(&m)).unwrap();
        assert_eq!(ds.n_features(), 4);
        assert_eq!(ds.groups.len(), 1);
        assert_eq!(ds.groups[0].members, vec![1, 2, 3]);
        assert_eq!(costs.group_costs, vec![2.5]);
        let map = ds.group_map();
        assert_eq!(map, vec![None, Some(0), Some(0), Some(0)]);
        // levels sorted: blue, green, red
        assert_eq!(ds.row(0), &[30.0, 0.0, 0.0, 1.0]);
        let units = AcquisitionUnits::new(&ds, &costs).unwrap();
        assert_eq!(units.len(), 2);
        assert_eq!(units.total_cost(), 3.5);
    }

    #[test]
    fn manifest_groups_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(dir.path(), "t.csv", "a,b,c,y\n1,2,3,0\n4,5,6,1\n");
        let m = write_file(
            dir.path(),
            "m.json",
            r#"{"costs": {"a": 3}, "groups": [{"id": 7, "cost": 4, "members": ["b", "c"]}]}"#,
        );
        let (ds, costs) = load_csv(&p, "y", Some(&m)).unwrap();
        assert_eq!(ds.groups[0].id, "7");
        assert_eq!(costs.feature_costs[0], 3.0);
        let bad = write_file(
            dir.path(),
            "bad.json",
            r#"{"groups": [{"id": "g", "cost": 1, "members": ["nope"]}]}"#,
        );
        assert!(matches!(
            load_csv(&p, "y", Some(&bad)),
            Err(FactError::ManifestColumn(_))
        ));
        assert!(matches!(
            load_csv(&p, "missing", None),
            Err(FactError::UnknownColumn(_))
        ));
        assert!(matches!(
            load_csv(&dir.path().join("absent.csv"), "y", None),
            Err(FactError::Io { .. })
        ));
        let nn = write_file(dir.path(), "nn.csv", "a,y\nfoo,1\n");
        assert!(matches!(
            load_csv(&nn, "y", None),
            Err(FactError::NonNumeric { .. })
        ));
    }

    #[test]
    fn thyroid_shaped_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::new();
        let names: Vec<String> = (0..16).map(|j| format!("x{j}")).collect();
        text.push_str(&names.join(","));
        text.push_str(",class\n");
        for i in 0..279 {
            let row: Vec<String> = (0..16).map(|j| ((i * 7 + j) % 13).to_string()).collect();
            text.push_str(&row.join(","));
            text.push_str(&format!(",{}\n", i % 3 + 1));
        }
        let p = write_file(dir.path(), "thyroid.csv", &text);
        let (ds, _) = load_csv(&p, "class", None).unwrap();
        assert_eq!((ds.n_instances(), ds.n_features(), ds.n_classes()), (279, 16, 3));
        assert_eq!(ds.class_names, vec!["1", "2", "3"]);
    }

    #[test]
    fn normalization_maps_and_clamps() {
        let ds = toy(vec![vec![0.0, 7.0], vec![5.0, 7.0], vec![10.0, 7.0]]);
        let (n, spec) = normalize(&ds, &ds, "all").unwrap();
        assert_eq!(n.column(0), vec![0.0, 0.5, 1.0 - 1.0 / 256.0]);
        assert_eq!(n.column(1), vec![0.0; 3]);
        assert_eq!(spec.computed_on, "all");
    }

    #[test]
    fn values_outside_training_range_clamp() {
        let train = toy(vec![vec![0.0], vec![1.0]]);
        let spec = NormalizationSpec::fit(&train, "train", 8).unwrap();
        assert_eq!(spec.apply_value(0, 2.0), (0.99609375, true));
        assert_eq!(spec.apply_value(0, -1.0), (0.0, true));
        assert_eq!(spec.apply_value(0, 1.0), (0.99609375, false));
    }

    #[test]
    fn normalization_of_empty_source_fails() {
        let ds = toy(vec![vec![1.0]]).subset(&[]);
        assert!(matches!(
            NormalizationSpec::fit(&ds, "train", 8),
            Err(FactError::EmptySplit(_))
        ));
    }

    #[test]
    fn normalization_is_idempotent_on_its_output() {
        let ds = toy(vec![vec![-3.0, 1.0], vec![2.0, 4.0], vec![9.0, -2.0], vec![0.5, 0.0]]);
        let (once, _) = normalize(&ds, &ds, "all").unwrap();
        let (twice, _) = normalize(&once, &once, "all").unwrap();
        for (a, b) in once.rows().zip(twice.rows()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1.0 / 256.0, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = toy((0..100).map(|i| vec![i as f64]).collect());
        let spec = SplitSpec {
            seed: 9,
            ..Default::default()
        };
        let s = split(&ds, &spec).unwrap();
        assert_eq!(
            (s.test.n_instances(), s.validation.n_instances(), s.train.n_instances()),
            (15, 15, 70)
        );
        let a = split_indices(100, &spec).unwrap();
        let b = split_indices(100, &spec).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).chain(&a.2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(matches!(split_indices(3, &spec), Err(FactError::EmptySplit(_))));
    }

    #[test]
    fn synthesized_shape_costs_and_determinism() {
        let (ds, costs) = generate_synthesized(3);
        assert_eq!((ds.n_instances(), ds.n_features(), ds.n_classes()), (16000, 64, 2));
        let expected: Vec<f64> = (1..=32).chain(1..=32).map(|c| c as f64).collect();
        assert_eq!(costs.feature_costs, expected);
        let (again, _) = generate_synthesized(3);
        assert_eq!(ds, again);
        let (other, _) = generate_synthesized(4);
        assert_ne!(ds, other);
    }

    #[test]
    fn cost_schedule_rejects_nonpositive() {
        let ds = toy(vec![vec![1.0, 2.0]]);
        let bad = CostSchedule {
            feature_costs: vec![1.0, 0.0],
            group_costs: vec![],
        };
        assert!(bad.validate(&ds).is_err());
        assert!(CostSchedule::uniform(2).validate(&ds).is_ok());
    }

    #[test]
    fn overlapping_groups_rejected() {
        let ds = toy(vec![vec![1.0, 2.0, 3.0]]);
        let groups = vec![
            FeatureGroup { id: "a".into(), members: vec![0, 1] },
            FeatureGroup { id: "b".into(), members: vec![1, 2] },
        ];
        assert!(ds.with_groups(groups).is_err());
    }
}
