//! Trained fixtures shared by the slow integration tests and the acceptance
//! runner. Each recipe is trained once and cached under the cargo target
//! temp dir, keyed by a hash of the recipe.
#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use fact_core::data::{split, AcquisitionUnits, SplitSpec, Splits, SynthConfig};
use fact_core::model::{fit, CorruptionConfig, EpochRecord, FitConfig, ModelBundle, TrainingConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SYNTH_SEED: u64 = 7;
pub const SYNTH36_SEED: u64 = 11;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recipe {
    pub synth: SynthConfig,
    pub data_seed: u64,
    pub split: SplitSpec,
    pub fit: FitConfig,
}

impl Recipe {
    fn key(&self) -> String {
        let text = serde_json::to_string(&(env!("CARGO_PKG_VERSION"), self)).unwrap();
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub struct Trained {
    pub recipe: Recipe,
    pub splits: Splits,
    pub bundle: ModelBundle,
    pub log: Vec<EpochRecord>,
    /// Wall-clock seconds the original training took.
    pub fit_seconds: f64,
}

#[derive(Serialize, Deserialize)]
struct CacheMeta {
    log: Vec<EpochRecord>,
    fit_seconds: f64,
}

/// The 64-feature benchmark with the reference architecture.
pub fn synthesized_recipe(alpha: f64) -> Recipe {
    Recipe {
        synth: SynthConfig::default(),
        data_seed: SYNTH_SEED,
        split: SplitSpec {
            seed: SYNTH_SEED,
            ..SplitSpec::default()
        },
        fit: FitConfig {
            encoder: vec![16, 10],
            predictor: vec![8, 4],
            bits: 8,
            corruption: CorruptionConfig {
                alpha,
                beta: 1.5,
                seed: SYNTH_SEED,
                fixed_rate: None,
            },
            training: TrainingConfig {
                seed: SYNTH_SEED,
                ..TrainingConfig::default()
            },
        },
    }
}

/// 18 informative plus 18 noise features.
pub fn synthesized36_recipe() -> Recipe {
    Recipe {
        synth: SynthConfig {
            informative: 18,
            noise: 18,
            points_per_center: 400,
            ..SynthConfig::default()
        },
        data_seed: SYNTH36_SEED,
        split: SplitSpec {
            seed: SYNTH36_SEED,
            ..SplitSpec::default()
        },
        fit: FitConfig {
            encoder: vec![16, 8],
            predictor: vec![4],
            bits: 8,
            corruption: CorruptionConfig {
                seed: SYNTH36_SEED,
                ..CorruptionConfig::default()
            },
            training: TrainingConfig {
                seed: SYNTH36_SEED,
                ..TrainingConfig::default()
            },
        },
    }
}

fn cache_dir(recipe: &Recipe) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("fact-fixtures")
        .join(recipe.key())
}

/// Splits (normalized on train) and the bundle for `recipe`, training only
/// when no cached bundle exists.
pub fn train(recipe: &Recipe) -> Trained {
    let (ds, costs) = recipe.synth.generate(recipe.data_seed).expect("valid synthetic recipe");
    let (splits, normalization) = split(&ds, &recipe.split)
        .and_then(|s| s.normalized(recipe.fit.bits))
        .expect("splits");
    let dir = cache_dir(recipe);
    if let (Ok(bundle), Ok(meta)) = (ModelBundle::load(&dir), fs::read_to_string(dir.join("meta.json"))) {
        let meta: CacheMeta = serde_json::from_str(&meta).expect("cache metadata");
        if bundle.manifest.dataset_fingerprint == ds.fingerprint() {
            return Trained {
                recipe: recipe.clone(),
                splits,
                bundle,
                log: meta.log,
                fit_seconds: meta.fit_seconds,
            };
        }
    }
    let units = AcquisitionUnits::new(&splits.train, &costs).expect("units");
    let start = Instant::now();
    let mut outcome = fit(&splits.train, &splits.validation, &normalization, &units, &recipe.fit).expect("training");
    let fit_seconds = start.elapsed().as_secs_f64();
    outcome.bundle.manifest.dataset_fingerprint = ds.fingerprint();
    fs::create_dir_all(&dir).expect("cache dir");
    outcome.bundle.save(&dir).expect("save bundle");
    let meta = CacheMeta {
        log: outcome.log.clone(),
        fit_seconds,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string(&meta).unwrap()).expect("cache metadata");
    Trained {
        recipe: recipe.clone(),
        splits,
        bundle: outcome.bundle,
        log: outcome.log,
        fit_seconds,
    }
}

pub fn synthesized() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| train(&synthesized_recipe(1.5)))
}

pub fn synthesized36() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| train(&synthesized36_recipe()))
}
