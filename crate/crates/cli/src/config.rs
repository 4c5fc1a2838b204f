//! Run configuration: one JSON document, optionally patched from the command
//! line with dotted `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use fact_core::acquire::StoppingRule;
use fact_core::data::{SplitSpec, SynthConfig};
use fact_core::eval::PolicyKind;
use fact_core::model::{CorruptionConfig, FitConfig, TrainingConfig};
use fact_core::{OptimizerConfig, DEFAULT_BITS};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Where the labeled data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Clustered benchmark generated from the run seed.
    Synthesized {
        #[serde(default)]
        synth: SynthConfig,
    },
    /// Headed CSV with a label column and an optional cost manifest.
    Csv {
        path: PathBuf,
        target: String,
        #[serde(default)]
        manifest: Option<PathBuf>,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthesized {
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub encoder: Vec<usize>,
    pub predictor: Vec<usize>,
    pub bits: usize,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            encoder: vec![16, 10],
            predictor: vec![8, 4],
            bits: DEFAULT_BITS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSettings {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for CorruptionSettings {
    fn default() -> Self {
        Self { alpha: 1.5, beta: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub test_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            test_fraction: s.test_fraction,
            validation_fraction: s.validation_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub alphas: Vec<f64>,
    pub beta: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            alphas: vec![1.5, 3.5, 5.5],
            beta: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderMatrixSettings {
    /// Number of leading test instances to trace.
    pub instances: usize,
    pub stopping: StoppingRule,
}

impl Default for OrderMatrixSettings {
    fn default() -> Self {
        Self {
            instances: 100,
            stopping: StoppingRule::AccuracyFraction(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSettings {
    pub host: String,
    pub port: u16,
    pub idle_timeout_secs: u64,
    pub event_log: Option<PathBuf>,
}

impl Default for ServeSettings {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            idle_timeout_secs: 3600,
            event_log: None,
        }
    }
}

/// Everything a command needs. Every stochastic component derives its seed
/// from `seed`, so identical configs give identical artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub dataset: DatasetSource,
    pub architecture: ArchitectureConfig,
    pub corruption: CorruptionSettings,
    pub optimizer: OptimizerConfig,
    pub training: TrainingSettings,
    pub split: SplitSettings,
    pub policies: Vec<PolicyKind>,
    /// Seeds for the stochastic baselines; each gets its own run.
    pub random_seeds: Vec<u64>,
    pub stopping: StoppingRule,
    pub output_dir: PathBuf,
    /// Bundle directory; defaults to `<output_dir>/bundle`.
    pub bundle: Option<PathBuf>,
    pub order_matrix: OrderMatrixSettings,
    pub sweep: SweepSettings,
    pub serve: ServeSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            dataset: DatasetSource::default(),
            architecture: ArchitectureConfig::default(),
            corruption: CorruptionSettings::default(),
            optimizer: OptimizerConfig::default(),
            training: TrainingSettings::default(),
            split: SplitSettings::default(),
            policies: vec![PolicyKind::Fact, PolicyKind::Random, PolicyKind::Static],
            random_seeds: vec![1, 2, 3],
            stopping: StoppingRule::Exhaustion,
            output_dir: PathBuf::from("out"),
            bundle: None,
            order_matrix: OrderMatrixSettings::default(),
            sweep: SweepSettings::default(),
            serve: ServeSettings::default(),
        }
    }
}

/// Command-line values layered over the config file, in increasing priority:
/// file, `--set` overrides, then the dedicated flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut doc = serde_json::to_value(RunConfig::default()).expect("default config serializes");
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let file: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if !file.is_object() {
                return Err(CliError::Config(format!("{}: top level must be an object", p.display())));
            }
            merge(&mut doc, file);
        }
        for set in &overrides.sets {
            apply_set(&mut doc, set)?;
        }
        if let Some(seed) = overrides.seed {
            apply_value(&mut doc, "seed", Value::from(seed))?;
        }
        if let Some(out) = &overrides.out {
            apply_value(&mut doc, "output_dir", Value::from(out.to_string_lossy().into_owned()))?;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seed.is_none() {
            return Err(CliError::Config("a seed is required (config key `seed` or --seed)".into()));
        }
        if let DatasetSource::Csv { path, manifest, .. } = &self.dataset {
            for p in std::iter::once(path).chain(manifest) {
                if !p.exists() {
                    return Err(CliError::Io(format!("{}: file not found", p.display())));
                }
            }
        }
        if self.random_seeds.is_empty() {
            return Err(CliError::Config("random_seeds must not be empty".into()));
        }
        if self.policies.is_empty() {
            return Err(CliError::Config("at least one policy is required".into()));
        }
        self.stopping.validate()?;
        self.order_matrix.stopping.validate()?;
        self.optimizer.validate()?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    pub fn bundle_dir(&self) -> PathBuf {
        self.bundle.clone().unwrap_or_else(|| self.output_dir.join("bundle"))
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.split.test_fraction,
            validation_fraction: self.split.validation_fraction,
            seed: self.seed(),
        }
    }

    pub fn corruption_config(&self) -> CorruptionConfig {
        CorruptionConfig {
            alpha: self.corruption.alpha,
            beta: self.corruption.beta,
            seed: self.seed(),
            fixed_rate: None,
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            encoder: self.architecture.encoder.clone(),
            predictor: self.architecture.predictor.clone(),
            bits: self.architecture.bits,
            corruption: self.corruption_config(),
            training: TrainingConfig {
                optimizer: self.optimizer,
                batch_size: self.training.batch_size,
                max_epochs: self.training.max_epochs,
                patience: self.training.patience,
                seed: self.seed(),
            },
        }
    }
}

/// Deep-merges `patch` into `base`. A tagged object whose `kind` changes is
/// replaced whole, since its other keys belong to the old variant.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) if !kind_changes(b, &p) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn kind_changes(base: &Map<String, Value>, patch: &Map<String, Value>) -> bool {
    matches!((base.get("kind"), patch.get("kind")), (Some(a), Some(b)) if a != b)
}

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and
/// taken as a plain string otherwise.
fn apply_set(doc: &mut Value, set: &str) -> Result<(), CliError> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {set:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::from(raw));
    apply_value(doc, key.trim(), value)
}

/// Writes `value` at the dotted `key`, merging into an existing object.
fn apply_value(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed override key {key:?}")));
    }
    let mut node = doc;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?} descends into a non-object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override {key:?} descends into a non-object")))?;
    match obj.get_mut(parts[parts.len() - 1]) {
        Some(slot) => merge(slot, value),
        None => {
            obj.insert(parts[parts.len() - 1].to_string(), value);
        }
    }
    Ok(())
}
