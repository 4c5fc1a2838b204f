//! The batch commands. Each reads a validated [`RunConfig`] and writes its
//! artifacts under the configured output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use fact_core::acquire::FactPolicy;
use fact_core::data::{load_csv, split, AcquisitionUnits, CostManifest, CostSchedule, Dataset, Splits};
use fact_core::eval::{
    acquisition_order_matrix, beta_sweep, compare_policies, write_curves_csv, AuaccReport, OrderMatrix, SweepReport,
};
use fact_core::model::{fit, EpochRecord, ModelBundle};
use fact_core::NormalizationSpec;
use serde::Serialize;
use tracing::info;

use crate::config::{DatasetSource, RunConfig};
use crate::error::CliError;

pub const SYNTH_CSV: &str = "synthesized.csv";
pub const SYNTH_MANIFEST: &str = "costs.json";
pub const TARGET_COLUMN: &str = "target";
pub const TRAINING_LOG: &str = "training_log.csv";
pub const RESOLVED_CONFIG: &str = "run_config.json";
pub const SUMMARY: &str = "summary.json";

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Raw dataset and its cost schedule as named by the config.
pub fn load_dataset(cfg: &RunConfig) -> Result<(Dataset, CostSchedule), CliError> {
    match &cfg.dataset {
        DatasetSource::Synthesized { synth } => Ok(synth.generate(cfg.seed())?),
        DatasetSource::Csv {
            path,
            target,
            manifest,
        } => Ok(load_csv(path, target, manifest.as_deref())?),
    }
}

/// Data as the model sees it: raw splits normalized with `normalization`.
pub struct Prepared {
    pub raw: Dataset,
    pub costs: CostSchedule,
    pub splits: Splits,
}

fn prepare_with(cfg: &RunConfig, normalization: &NormalizationSpec) -> Result<Prepared, CliError> {
    let (raw, costs) = load_dataset(cfg)?;
    let s = split(&raw, &cfg.split_spec())?;
    let splits = Splits {
        train: normalization.apply(&s.train)?,
        validation: normalization.apply(&s.validation)?,
        test: normalization.apply(&s.test)?,
    };
    Ok(Prepared { raw, costs, splits })
}

/// Loads the configured bundle and the matching normalized splits, refusing
/// a bundle trained on different data.
pub fn load_bundle_and_data(cfg: &RunConfig) -> Result<(ModelBundle, Prepared), CliError> {
    let dir = cfg.bundle_dir();
    if !dir.exists() {
        return Err(CliError::Io(format!("{}: bundle not found", dir.display())));
    }
    let bundle = ModelBundle::load(&dir)?;
    let data = prepare_with(cfg, bundle.normalization())?;
    let expected = &bundle.manifest.dataset_fingerprint;
    if !expected.is_empty() && *expected != data.raw.fingerprint() {
        return Err(CliError::Config(format!(
            "bundle {} was trained on different data (fingerprint {expected})",
            dir.display()
        )));
    }
    Ok((bundle, data))
}

/// Writes the synthesized CSV and its cost manifest.
pub fn gen_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let DatasetSource::Synthesized { synth } = &cfg.dataset else {
        return Err(CliError::Config("gen-synth needs a synthesized dataset source".into()));
    };
    let (ds, costs) = synth.generate(cfg.seed())?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::Io(format!("{}: {e}", cfg.output_dir.display())))?;
    let csv_path = cfg.output_dir.join(SYNTH_CSV);
    let manifest_path = cfg.output_dir.join(SYNTH_MANIFEST);
    ds.write_csv(&csv_path, TARGET_COLUMN)?;
    CostManifest::from_schedule(&ds, &costs).write(&manifest_path)?;
    info!(rows = ds.n_instances(), features = ds.n_features(), "wrote {}", csv_path.display());
    Ok(vec![csv_path, manifest_path])
}

pub fn write_training_log(path: &Path, log: &[EpochRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(["phase", "epoch", "train_loss", "validation_loss", "validation_accuracy", "best_objective"])
        .map_err(io)?;
    for r in log {
        w.write_record([
            r.phase.clone(),
            r.epoch.to_string(),
            opt(r.train_loss),
            r.validation_loss.to_string(),
            opt(r.validation_accuracy),
            r.best_objective.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub bundle_dir: PathBuf,
    pub fingerprint: String,
    pub epochs: usize,
    pub seconds: f64,
    pub test_accuracy: f64,
}

fn full_accuracy(bundle: &ModelBundle, test: &Dataset) -> Result<f64, CliError> {
    let full = fact_core::MaskVector::all_known(test.n_features());
    let mut correct = 0usize;
    for (i, row) in test.rows().enumerate() {
        let p = bundle.predict(row, &full)?;
        correct += usize::from(fact_core::model::argmax(&p) == test.target(i));
    }
    Ok(correct as f64 / test.n_instances().max(1) as f64)
}

fn train_on(
    cfg: &RunConfig,
    fit_cfg: &fact_core::model::FitConfig,
    out_dir: &Path,
) -> Result<(ModelBundle, Prepared, TrainReport), CliError> {
    let (raw, costs) = load_dataset(cfg)?;
    let (splits, normalization) = split(&raw, &cfg.split_spec())?.normalized(fit_cfg.bits)?;
    let units = AcquisitionUnits::new(&splits.train, &costs)?;
    info!(
        train = splits.train.n_instances(),
        validation = splits.validation.n_instances(),
        units = units.len(),
        "training autoencoder then predictor"
    );
    let start = Instant::now();
    let mut outcome = fit(&splits.train, &splits.validation, &normalization, &units, fit_cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    outcome.bundle.manifest.dataset_fingerprint = raw.fingerprint();
    let bundle_dir = out_dir.join("bundle");
    outcome.bundle.save(&bundle_dir)?;
    write_training_log(&out_dir.join(TRAINING_LOG), &outcome.log)?;
    let report = TrainReport {
        fingerprint: outcome.bundle.fingerprint(),
        epochs: outcome.log.len(),
        seconds,
        test_accuracy: full_accuracy(&outcome.bundle, &splits.test)?,
        bundle_dir,
    };
    info!(seconds, accuracy = report.test_accuracy, "saved {}", report.bundle_dir.display());
    Ok((outcome.bundle, Prepared { raw, costs, splits }, report))
}

/// Trains the autoencoder and predictor and writes the bundle, the per-epoch
/// log and the resolved config.
pub fn train(cfg: &RunConfig) -> Result<TrainReport, CliError> {
    let out = cfg.bundle.as_ref().and_then(|b| b.parent().map(Path::to_path_buf));
    let out_dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let (_, _, report) = train_on(cfg, &cfg.fit_config(), &out_dir)?;
    write_json(&out_dir.join(RESOLVED_CONFIG), cfg)?;
    Ok(report)
}

/// Runs every configured policy over the test split and writes one curve
/// file per policy, a combined curve file and the summary.
pub fn simulate(cfg: &RunConfig) -> Result<AuaccReport, CliError> {
    let (bundle, data) = load_bundle_and_data(cfg)?;
    info!(policies = cfg.policies.len(), instances = data.splits.test.n_instances(), "simulating");
    let cmp = compare_policies(
        &bundle,
        &data.splits.train,
        &data.splits.test,
        &cfg.policies,
        &cfg.random_seeds,
        &cfg.stopping,
    )?;
    let curves_dir = cfg.output_dir.join("curves");
    for curve in &cmp.curves {
        let path = curves_dir.join(format!("{}.csv", curve.policy));
        let mut w = create(&path)?;
        write_curves_csv(std::slice::from_ref(curve), &mut w)?;
        w.flush()?;
    }
    let mut w = create(&cfg.output_dir.join("curves.csv"))?;
    write_curves_csv(&cmp.curves, &mut w)?;
    w.flush()?;
    let mut w = create(&cfg.output_dir.join(SUMMARY))?;
    cmp.report.write_json(&mut w)?;
    w.flush()?;
    Ok(cmp.report)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderSummary {
    pub instances: usize,
    pub stop_step: Option<usize>,
    pub mean_acquired: f64,
    /// Fraction of traced instances that acquired each unit.
    pub fill_rate: Vec<(String, f64)>,
}

/// Traces the acquisition order of the sensitivity policy on the leading
/// test instances.
pub fn order_matrix(cfg: &RunConfig) -> Result<(OrderMatrix, OrderSummary), CliError> {
    let (bundle, data) = load_bundle_and_data(cfg)?;
    let n = cfg.order_matrix.instances.min(data.splits.test.n_instances());
    let rows: Vec<usize> = (0..n).collect();
    let (matrix, sim) =
        acquisition_order_matrix(&bundle, &data.splits.test, &rows, &FactPolicy, &cfg.order_matrix.stopping)?;
    let names: Vec<String> = bundle.units().iter().map(|u| u.name.clone()).collect();
    let mut w = create(&cfg.output_dir.join("order_matrix.csv"))?;
    matrix.write_csv(&mut w, &names)?;
    w.flush()?;
    let acquired: usize = matrix.ranks.iter().map(|r| r.iter().filter(|&&x| x > 0).count()).sum();
    let summary = OrderSummary {
        instances: n,
        stop_step: sim.stop_step,
        mean_acquired: acquired as f64 / n.max(1) as f64,
        fill_rate: names
            .iter()
            .enumerate()
            .map(|(u, name)| (name.clone(), matrix.fill_rate(&[u])))
            .collect(),
    };
    write_json(&cfg.output_dir.join("order_matrix.json"), &summary)?;
    Ok((matrix, summary))
}

/// Retrains once per configured alpha and reports the area under each
/// model's cost curve.
pub fn sweep(cfg: &RunConfig) -> Result<SweepReport, CliError> {
    let pairs: Vec<(f64, f64)> = cfg.sweep.alphas.iter().map(|&a| (a, cfg.sweep.beta)).collect();
    if pairs.is_empty() {
        return Err(CliError::Config("sweep.alphas must not be empty".into()));
    }
    let base = cfg.fit_config();
    // training happens up front so its failures keep their exit class
    let mut test = None;
    let mut trained = Vec::with_capacity(pairs.len());
    for &(alpha, beta) in &pairs {
        let mut fit_cfg = base.clone();
        fit_cfg.corruption.alpha = alpha;
        fit_cfg.corruption.beta = beta;
        let dir = cfg.output_dir.join("sweep").join(format!("alpha_{alpha}_beta_{beta}"));
        info!(alpha, beta, "training sweep model");
        let (bundle, data, _) = train_on(cfg, &fit_cfg, &dir)?;
        test.get_or_insert(data.splits.test);
        trained.push(bundle);
    }
    let test = test.expect("at least one sweep model");
    let mut bundles = trained.into_iter();
    let report = beta_sweep(&test, &base.corruption, &pairs, |_| {
        Ok(bundles.next().expect("one bundle per pair"))
    })?;
    let mut w = create(&cfg.output_dir.join("beta_sweep.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    write_json(&cfg.output_dir.join("beta_sweep.json"), &report)?;
    Ok(report)
}
