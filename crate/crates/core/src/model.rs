//! Training of the denoising autoencoder and the fine-tuned predictor, and
//! the trained bundle used at acquisition time.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{dequantize, quantize, quantize_into, BitMatrix, MaskVector};
use crate::data::{AcquisitionUnits, Dataset, NormalizationSpec};
use crate::error::{FactError, Result};
use crate::nn::{
    weighted_bit_xent_flat, weighted_bit_xent_logit_grad, Activation, Adam, ForwardCache, GradSeed,
    Gradients, Network, OptimizerConfig,
};

/// Learning-rate multiplier of the pre-trained encoder layers while the
/// predictor is fine-tuned (0.0001 against 0.001 for the new layers).
pub const ENCODER_FINE_TUNE_MULTIPLIER: f64 = 0.1;

/// Seeded generator for an independent stream derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_AE_INIT: u64 = 1;
const STREAM_AE_SHUFFLE: u64 = 2;
const STREAM_AE_CORRUPT: u64 = 3;
const STREAM_PRED_INIT: u64 = 4;
const STREAM_PRED_SHUFFLE: u64 = 5;
const STREAM_PRED_CORRUPT: u64 = 6;
const STREAM_VALIDATION: u64 = 7;

/// Layer widths of the autoencoder and predictor.
///
/// The encoder maps `n_features * bits` inputs through `encoder` hidden
/// widths to the code; the decoder mirrors the encoder; the predictor
/// stacks `predictor` hidden widths and an `n_classes` softmax on the code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub n_features: usize,
    pub bits: usize,
    pub encoder: Vec<usize>,
    pub predictor: Vec<usize>,
    pub n_classes: usize,
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.bits == 0 {
            return Err(FactError::InvalidParameter("architecture needs features and bits".into()));
        }
        if self.encoder.is_empty() {
            return Err(FactError::InvalidParameter("encoder needs at least one hidden layer".into()));
        }
        if self.encoder.iter().chain(&self.predictor).any(|&w| w == 0) {
            return Err(FactError::InvalidParameter("layer widths must be at least 1".into()));
        }
        if self.n_classes < 2 {
            return Err(FactError::InvalidParameter("need at least two classes".into()));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.n_features * self.bits
    }

    /// Encoder widths including the binary input layer.
    pub fn encoder_widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width()).chain(self.encoder.iter().copied()).collect()
    }

    pub fn autoencoder_widths(&self) -> Vec<usize> {
        let enc = self.encoder_widths();
        let mut widths = enc.clone();
        widths.extend(enc.iter().rev().skip(1));
        widths
    }

    pub fn build_autoencoder<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Network> {
        self.validate()?;
        let widths = self.autoencoder_widths();
        let mut acts = vec![Activation::Relu; widths.len() - 2];
        acts.push(Activation::Sigmoid);
        Network::random(&widths, &acts, rng)
    }

    /// Copies the encoder layers out of `autoencoder` and stacks freshly
    /// initialized prediction layers on the code.
    pub fn build_predictor<R: Rng + ?Sized>(&self, autoencoder: &Network, rng: &mut R) -> Result<Network> {
        self.validate()?;
        let n_enc = self.encoder.len();
        if autoencoder.input_width() != self.input_width() || autoencoder.layers().len() != 2 * n_enc {
            return Err(FactError::DimensionMismatch {
                expected: self.input_width(),
                actual: autoencoder.input_width(),
            });
        }
        let mut layers: Vec<_> = autoencoder.layers()[..n_enc].to_vec();
        let code = *self.encoder.last().expect("validated non-empty");
        let mut widths = vec![code];
        widths.extend(&self.predictor);
        widths.push(self.n_classes);
        let mut acts = vec![Activation::Relu; widths.len() - 2];
        acts.push(Activation::Softmax);
        let head = Network::random(&widths, &acts, rng)?;
        layers.extend(head.layers().iter().cloned());
        let mut net = Network::from_layers(layers)?;
        for l in 0..n_enc {
            net.set_lr_multiplier(l, ENCODER_FINE_TUNE_MULTIPLIER);
        }
        Ok(net)
    }
}

/// Training-time missingness: each instance draws `p ~ Beta(alpha, beta)`
/// and drops every acquisition unit independently with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// Replaces the Beta draw with a constant missing probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_rate: Option<f64>,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            beta: 1.5,
            seed: 0,
            fixed_rate: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corruptor {
    beta: Option<Beta<f64>>,
    fixed: f64,
}

impl Corruptor {
    pub fn new(cfg: &CorruptionConfig) -> Result<Self> {
        if let Some(rate) = cfg.fixed_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(FactError::InvalidParameter(format!("missing rate {rate} outside [0, 1]")));
            }
            return Ok(Self { beta: None, fixed: rate });
        }
        if !(cfg.alpha > 0.0 && cfg.beta > 0.0 && cfg.alpha.is_finite() && cfg.beta.is_finite()) {
            return Err(FactError::InvalidParameter(format!(
                "beta parameters must be positive, got ({}, {})",
                cfg.alpha, cfg.beta
            )));
        }
        let beta = Beta::new(cfg.alpha, cfg.beta).map_err(|e| FactError::InvalidParameter(e.to_string()))?;
        Ok(Self {
            beta: Some(beta),
            fixed: 0.0,
        })
    }

    /// Draws the per-instance missing probability.
    pub fn draw_rate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.beta {
            Some(b) => b.sample(rng),
            None => self.fixed,
        }
    }

    /// Training mask: starts from `k0` and hides each unit with probability
    /// drawn once for the instance. Units unknown in `k0` stay unknown.
    pub fn corrupt<R: Rng + ?Sized>(&self, k0: &MaskVector, units: &AcquisitionUnits, rng: &mut R) -> MaskVector {
        let rate = self.draw_rate(rng);
        corrupt_with_rate(k0, units, rate, rng)
    }
}

pub fn corrupt_with_rate<R: Rng + ?Sized>(
    k0: &MaskVector,
    units: &AcquisitionUnits,
    rate: f64,
    rng: &mut R,
) -> MaskVector {
    let mut mask = k0.clone();
    for unit in units.iter() {
        let hide = rng.random::<f64>() < rate;
        if hide {
            for &m in &unit.members {
                mask.set_unknown(m);
            }
        }
    }
    mask
}

/// Mini-batch training settings shared by both phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            batch_size: 128,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(FactError::InvalidParameter("batch size and epoch budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: String,
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub validation_loss: f64,
    pub validation_accuracy: Option<f64>,
    /// Best validation objective seen so far (loss, or negated accuracy for
    /// the predictor), so it never increases.
    pub best_objective: f64,
}

/// Masks for the validation split, fixed for the whole run so epochs are
/// comparable.
fn validation_masks(
    val: &Dataset,
    units: &AcquisitionUnits,
    corruptor: &Corruptor,
    cfg: &CorruptionConfig,
) -> Vec<MaskVector> {
    let mut rng = rng_stream(cfg.seed, STREAM_VALIDATION);
    let full = MaskVector::all_known(val.n_features());
    (0..val.n_instances())
        .map(|_| corruptor.corrupt(&full, units, &mut rng))
        .collect()
}

fn check_inputs(arch: &ArchitectureSpec, train: &Dataset, val: &Dataset, units: &AcquisitionUnits) -> Result<()> {
    arch.validate()?;
    for ds in [train, val] {
        if ds.n_features() != arch.n_features {
            return Err(FactError::DimensionMismatch {
                expected: arch.n_features,
                actual: ds.n_features(),
            });
        }
    }
    if units.n_features() != arch.n_features {
        return Err(FactError::DimensionMismatch {
            expected: arch.n_features,
            actual: units.n_features(),
        });
    }
    if train.n_instances() == 0 {
        return Err(FactError::EmptySplit("train"));
    }
    if val.n_instances() == 0 {
        return Err(FactError::EmptySplit("validation"));
    }
    Ok(())
}

fn autoencoder_validation_loss(
    ae: &Network,
    val: &Dataset,
    masks: &[MaskVector],
    bits: usize,
    cache: &mut ForwardCache,
) -> f64 {
    let width = val.n_features() * bits;
    let mut input = vec![0.0; width];
    let mut target = vec![0.0; width];
    let full = MaskVector::all_known(val.n_features());
    let mut total = 0.0;
    for (i, mask) in masks.iter().enumerate() {
        quantize_into(val.row(i), mask, bits, &mut input);
        quantize_into(val.row(i), &full, bits, &mut target);
        ae.forward_into(&input, cache);
        total += weighted_bit_xent_flat(&target, cache.output(), bits);
    }
    total / masks.len() as f64
}

/// Trains the denoising autoencoder on corrupted inputs against the complete
/// binary encoding and returns the snapshot with the best validation loss.
pub fn train_autoencoder(
    train: &Dataset,
    val: &Dataset,
    arch: &ArchitectureSpec,
    units: &AcquisitionUnits,
    corruption: &CorruptionConfig,
    cfg: &TrainingConfig,
) -> Result<(Network, Vec<EpochRecord>)> {
    check_inputs(arch, train, val, units)?;
    cfg.validate()?;
    let bits = arch.bits;
    let corruptor = Corruptor::new(corruption)?;
    let mut net = arch.build_autoencoder(&mut rng_stream(cfg.seed, STREAM_AE_INIT))?;
    let mut adam = Adam::new(&net, cfg.optimizer)?;
    let mut shuffle_rng = rng_stream(cfg.seed, STREAM_AE_SHUFFLE);
    let mut corrupt_rng = rng_stream(corruption.seed, STREAM_AE_CORRUPT);
    let val_masks = validation_masks(val, units, &corruptor, corruption);

    let width = arch.input_width();
    let full = MaskVector::all_known(arch.n_features);
    let mut cache = ForwardCache::for_network(&net);
    let mut grads = Gradients::zeros_like(&net);
    let mut input = vec![0.0; width];
    let mut target = vec![0.0; width];
    let mut logit_grad = vec![0.0; width];

    let initial = autoencoder_validation_loss(&net, val, &val_masks, bits, &mut cache);
    let mut log = vec![EpochRecord {
        phase: "autoencoder".into(),
        epoch: 0,
        train_loss: None,
        validation_loss: initial,
        validation_accuracy: None,
        best_objective: initial,
    }];
    let mut best = (initial, net.clone());
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.n_instances()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            for &i in batch {
                let row = train.row(i);
                let mask = corruptor.corrupt(&full, units, &mut corrupt_rng);
                quantize_into(row, &mask, bits, &mut input);
                quantize_into(row, &full, bits, &mut target);
                net.forward_into(&input, &mut cache);
                epoch_loss += weighted_bit_xent_flat(&target, cache.output(), bits);
                weighted_bit_xent_logit_grad(&target, cache.output(), bits, &mut logit_grad);
                net.backward_into(&mut cache, &logit_grad, GradSeed::PreActivation, &mut grads, false);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut net, &grads).map_err(|e| FactError::Divergence(format!("autoencoder epoch {epoch}: {e}")))?;
        }
        let train_loss = epoch_loss / train.n_instances() as f64;
        let val_loss = autoencoder_validation_loss(&net, val, &val_masks, bits, &mut cache);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(FactError::Divergence(format!(
                "autoencoder loss became non-finite at epoch {epoch}"
            )));
        }
        if val_loss < best.0 {
            best = (val_loss, net.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        log.push(EpochRecord {
            phase: "autoencoder".into(),
            epoch,
            train_loss: Some(train_loss),
            validation_loss: val_loss,
            validation_accuracy: None,
            best_objective: best.0,
        });
        if since_best >= cfg.patience {
            break;
        }
    }
    Ok((best.1, log))
}

fn predictor_validation(
    net: &Network,
    val: &Dataset,
    masks: &[MaskVector],
    bits: usize,
    cache: &mut ForwardCache,
) -> (f64, f64) {
    let mut input = vec![0.0; val.n_features() * bits];
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (i, mask) in masks.iter().enumerate() {
        quantize_into(val.row(i), mask, bits, &mut input);
        net.forward_into(&input, cache);
        let y = cache.output();
        let label = val.target(i);
        loss -= y[label].max(1e-300).ln();
        if argmax(y) == label {
            correct += 1;
        }
    }
    let n = masks.len() as f64;
    (loss / n, correct as f64 / n)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fine-tunes a predictor stacked on a copy of the encoder. The
/// autoencoder passed in is left untouched.
pub fn train_predictor(
    autoencoder: &Network,
    train: &Dataset,
    val: &Dataset,
    arch: &ArchitectureSpec,
    units: &AcquisitionUnits,
    corruption: &CorruptionConfig,
    cfg: &TrainingConfig,
) -> Result<(Network, Vec<EpochRecord>)> {
    check_inputs(arch, train, val, units)?;
    cfg.validate()?;
    if train.n_classes() != arch.n_classes {
        return Err(FactError::DimensionMismatch {
            expected: arch.n_classes,
            actual: train.n_classes(),
        });
    }
    let bits = arch.bits;
    let corruptor = Corruptor::new(corruption)?;
    let mut net = arch.build_predictor(autoencoder, &mut rng_stream(cfg.seed, STREAM_PRED_INIT))?;
    let mut adam = Adam::new(&net, cfg.optimizer)?;
    let mut shuffle_rng = rng_stream(cfg.seed, STREAM_PRED_SHUFFLE);
    let mut corrupt_rng = rng_stream(corruption.seed, STREAM_PRED_CORRUPT);
    let val_masks = validation_masks(val, units, &corruptor, corruption);

    let full = MaskVector::all_known(arch.n_features);
    let mut cache = ForwardCache::for_network(&net);
    let mut grads = Gradients::zeros_like(&net);
    let mut input = vec![0.0; arch.input_width()];
    let mut logit_grad = vec![0.0; arch.n_classes];

    let (loss0, acc0) = predictor_validation(&net, val, &val_masks, bits, &mut cache);
    let mut log = vec![EpochRecord {
        phase: "predictor".into(),
        epoch: 0,
        train_loss: None,
        validation_loss: loss0,
        validation_accuracy: Some(acc0),
        best_objective: -acc0,
    }];
    let mut best = (acc0, net.clone());
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.n_instances()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            for &i in batch {
                let mask = corruptor.corrupt(&full, units, &mut corrupt_rng);
                quantize_into(train.row(i), &mask, bits, &mut input);
                net.forward_into(&input, &mut cache);
                let y = cache.output();
                let label = train.target(i);
                epoch_loss -= y[label].max(1e-300).ln();
                logit_grad.copy_from_slice(y);
                logit_grad[label] -= 1.0;
                net.backward_into(&mut cache, &logit_grad, GradSeed::PreActivation, &mut grads, false);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut net, &grads).map_err(|e| FactError::Divergence(format!("predictor epoch {epoch}: {e}")))?;
        }
        let train_loss = epoch_loss / train.n_instances() as f64;
        let (val_loss, val_acc) = predictor_validation(&net, val, &val_masks, bits, &mut cache);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(FactError::Divergence(format!(
                "predictor loss became non-finite at epoch {epoch}"
            )));
        }
        if val_acc > best.0 {
            best = (val_acc, net.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        log.push(EpochRecord {
            phase: "predictor".into(),
            epoch,
            train_loss: Some(train_loss),
            validation_loss: val_loss,
            validation_accuracy: Some(val_acc),
            best_objective: -best.0,
        });
        if since_best >= cfg.patience {
            break;
        }
    }
    Ok((best.1, log))
}

/// Everything needed at acquisition time: the frozen autoencoder for bit
/// probabilities, the fine-tuned predictor for class probabilities and
/// sensitivities, and the data conventions both were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub autoencoder: Network,
    pub predictor: Network,
    pub manifest: BundleManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: u32,
    pub architecture: ArchitectureSpec,
    pub normalization: NormalizationSpec,
    pub units: AcquisitionUnits,
    pub corruption: CorruptionConfig,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub dataset_fingerprint: String,
}

const AUTOENCODER_FILE: &str = "autoencoder.json";
const PREDICTOR_FILE: &str = "predictor.json";
const MANIFEST_FILE: &str = "manifest.json";

impl ModelBundle {
    pub fn new(autoencoder: Network, predictor: Network, manifest: BundleManifest) -> Result<Self> {
        let arch = &manifest.architecture;
        arch.validate()?;
        let width = arch.input_width();
        if autoencoder.input_width() != width
            || autoencoder.output_width() != width
            || predictor.input_width() != width
            || predictor.output_width() != arch.n_classes
        {
            return Err(FactError::DimensionMismatch {
                expected: width,
                actual: predictor.input_width(),
            });
        }
        if manifest.units.n_features() != arch.n_features || manifest.normalization.n_features() != arch.n_features {
            return Err(FactError::DimensionMismatch {
                expected: arch.n_features,
                actual: manifest.units.n_features(),
            });
        }
        Ok(Self {
            autoencoder,
            predictor,
            manifest,
        })
    }

    /// Untrained bundle with freshly initialized weights and identity
    /// normalization. Useful for exercising acquisition without training.
    pub fn random(arch: &ArchitectureSpec, units: AcquisitionUnits, seed: u64) -> Result<Self> {
        arch.validate()?;
        let autoencoder = arch.build_autoencoder(&mut rng_stream(seed, STREAM_AE_INIT))?;
        let predictor = arch.build_predictor(&autoencoder, &mut rng_stream(seed, STREAM_PRED_INIT))?;
        let d = arch.n_features;
        let manifest = BundleManifest {
            version: 1,
            architecture: arch.clone(),
            normalization: NormalizationSpec {
                min: vec![0.0; d],
                max: vec![1.0; d],
                bits: arch.bits,
                computed_on: "identity".into(),
            },
            units,
            corruption: CorruptionConfig::default(),
            feature_names: (0..d).map(|j| format!("f{j}")).collect(),
            class_names: (0..arch.n_classes).map(|c| c.to_string()).collect(),
            dataset_fingerprint: String::new(),
        };
        Self::new(autoencoder, predictor, manifest)
    }

    pub fn architecture(&self) -> &ArchitectureSpec {
        &self.manifest.architecture
    }

    pub fn units(&self) -> &AcquisitionUnits {
        &self.manifest.units
    }

    pub fn normalization(&self) -> &NormalizationSpec {
        &self.manifest.normalization
    }

    pub fn n_features(&self) -> usize {
        self.manifest.architecture.n_features
    }

    pub fn bits(&self) -> usize {
        self.manifest.architecture.bits
    }

    pub fn n_classes(&self) -> usize {
        self.manifest.architecture.n_classes
    }

    /// Same bundle with every acquisition cost multiplied by `factor`.
    pub fn with_scaled_costs(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.manifest.units = self.manifest.units.scaled(factor);
        out
    }

    /// Bit probabilities of the frozen autoencoder for the masked input.
    pub fn reconstruct_probabilities(&self, x: &[f64], k: &MaskVector) -> Result<BitMatrix> {
        let input = quantize(x, k, self.bits())?;
        let out = self.autoencoder.predict(input.as_slice())?;
        BitMatrix::from_flat(out, self.n_features(), self.bits())
    }

    /// Class probabilities for the masked input.
    pub fn predict(&self, x: &[f64], k: &MaskVector) -> Result<Vec<f64>> {
        let input = quantize(x, k, self.bits())?;
        self.predictor.predict(input.as_slice())
    }

    /// Hex SHA-256 over both networks' parameters.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for net in [&self.autoencoder, &self.predictor] {
            for layer in net.layers() {
                h.update((layer.rows as u64).to_le_bytes());
                h.update((layer.cols as u64).to_le_bytes());
                for v in layer.weights.iter().chain(&layer.bias) {
                    h.update(v.to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| FactError::io(dir, e))?;
        self.autoencoder.save(&dir.join(AUTOENCODER_FILE))?;
        self.predictor.save(&dir.join(PREDICTOR_FILE))?;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&path, text + "\n").map_err(|e| FactError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| FactError::io(&path, e))?;
        let manifest: BundleManifest = serde_json::from_str(&text)?;
        if manifest.version != 1 {
            return Err(FactError::Checkpoint(format!("unsupported bundle version {}", manifest.version)));
        }
        let autoencoder = Network::load(&dir.join(AUTOENCODER_FILE))?;
        let predictor = Network::load(&dir.join(PREDICTOR_FILE))?;
        Self::new(autoencoder, predictor, manifest)
    }
}

/// Mean relative reduction (in percent) of the Euclidean distance to the
/// complete vector achieved by the reconstruction, over corrupted test
/// instances. Instances whose corruption removed nothing are skipped.
pub fn denoising_percentage(bundle: &ModelBundle, test: &Dataset, corruption: &CorruptionConfig) -> Result<f64> {
    let corruptor = Corruptor::new(corruption)?;
    let mut rng = rng_stream(corruption.seed, STREAM_VALIDATION);
    let d = bundle.n_features();
    let full = MaskVector::all_known(d);
    let mut total = 0.0;
    let mut counted = 0usize;
    for row in test.rows() {
        let mask = corruptor.corrupt(&full, bundle.units(), &mut rng);
        let x: Vec<f64> = (0..d).map(|j| if mask.is_known(j) { row[j] } else { 0.0 }).collect();
        let recon = dequantize(&bundle.reconstruct_probabilities(&x, &mask)?)?;
        if let Some(p) = denoising_ratio(&x, &recon, row) {
            total += p;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(FactError::InvalidParameter("no corrupted test instance differs from its original".into()));
    }
    Ok(total / counted as f64)
}

/// `100 * (|x - x~| - |x' - x~|) / |x - x~|`, or `None` when `x == x~`.
pub fn denoising_ratio(corrupted: &[f64], reconstructed: &[f64], complete: &[f64]) -> Option<f64> {
    let dist = |a: &[f64]| -> f64 { a.iter().zip(complete).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt() };
    let before = dist(corrupted);
    if before == 0.0 {
        return None;
    }
    Some(100.0 * (before - dist(reconstructed)) / before)
}

/// Complete training recipe for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub encoder: Vec<usize>,
    pub predictor: Vec<usize>,
    pub bits: usize,
    pub corruption: CorruptionConfig,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub bundle: ModelBundle,
    pub log: Vec<EpochRecord>,
}

/// Trains the autoencoder, then the predictor, on normalized splits.
pub fn fit(
    train: &Dataset,
    val: &Dataset,
    normalization: &NormalizationSpec,
    units: &AcquisitionUnits,
    cfg: &FitConfig,
) -> Result<FitOutcome> {
    let arch = ArchitectureSpec {
        n_features: train.n_features(),
        bits: cfg.bits,
        encoder: cfg.encoder.clone(),
        predictor: cfg.predictor.clone(),
        n_classes: train.n_classes(),
    };
    let (autoencoder, mut log) = train_autoencoder(train, val, &arch, units, &cfg.corruption, &cfg.training)?;
    let (predictor, pred_log) =
        train_predictor(&autoencoder, train, val, &arch, units, &cfg.corruption, &cfg.training)?;
    log.extend(pred_log);
    let manifest = BundleManifest {
        version: 1,
        architecture: arch,
        normalization: normalization.clone(),
        units: units.clone(),
        corruption: cfg.corruption,
        feature_names: train.feature_names.clone(),
        class_names: train.class_names.clone(),
        dataset_fingerprint: String::new(),
    };
    Ok(FitOutcome {
        bundle: ModelBundle::new(autoencoder, predictor, manifest)?,
        log,
    })
}
