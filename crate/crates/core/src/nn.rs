//! Dense feed-forward networks with exact reverse-mode gradients, input
//! Jacobians, Adam, and the two training losses.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::BitMatrix;
use crate::error::{FactError, Result};

/// Clipping applied to bit probabilities inside the reconstruction loss.
pub const PROB_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
    Softmax,
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Linear => {}
            Activation::Softmax => softmax_in_place(z),
        }
    }

    /// Turns a gradient w.r.t. the activation output `y` into one w.r.t. the
    /// pre-activation, in place.
    fn backprop(self, y: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (g, &v) in grad.iter_mut().zip(y) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &v) in grad.iter_mut().zip(y) {
                    *g *= v * (1.0 - v);
                }
            }
            Activation::Linear => {}
            Activation::Softmax => {
                let dot: f64 = grad.iter().zip(y).map(|(g, v)| g * v).sum();
                for (g, &v) in grad.iter_mut().zip(y) {
                    *g = v * (*g - dot);
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// A fully connected layer `y = act(W x + b)` with `W` stored row-major as
/// `rows x cols` (outputs by inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(cols: usize, rows: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (cols + rows) as f64).sqrt();
        let weights = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
        Self {
            rows,
            cols,
            activation,
            weights,
            bias: vec![0.0; rows],
        }
    }

    #[inline]
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.cols..(o + 1) * self.cols]
    }

    /// `out = W x + b`, skipping zero inputs when the input is sparse.
    fn affine(&self, input: &[f64], out: &mut [f64], nz: &mut Vec<usize>) {
        nz.clear();
        nz.extend(input.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i));
        if nz.len() * 2 < input.len() {
            for (o, slot) in out.iter_mut().enumerate() {
                let w = self.row(o);
                let mut s = self.bias[o];
                for &i in nz.iter() {
                    s += w[i] * input[i];
                }
                *slot = s;
            }
        } else {
            for (o, slot) in out.iter_mut().enumerate() {
                let w = self.row(o);
                let mut s = self.bias[o];
                for (wi, xi) in w.iter().zip(input) {
                    s += wi * xi;
                }
                *slot = s;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Per-layer activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the network input, `activations[l + 1]` the
    /// output of layer `l`.
    activations: Vec<Vec<f64>>,
    nz: Vec<usize>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl ForwardCache {
    pub fn for_network(net: &Network) -> Self {
        let mut activations = vec![vec![0.0; net.input_width()]];
        activations.extend(net.layers.iter().map(|l| vec![0.0; l.rows]));
        Self {
            activations,
            nz: Vec::new(),
            delta: Vec::new(),
            next_delta: Vec::new(),
        }
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache has an input slot")
    }

    /// Output of layer `l`.
    pub fn layer_output(&self, l: usize) -> &[f64] {
        &self.activations[l + 1]
    }

    pub(crate) fn matches(&self, net: &Network) -> bool {
        self.activations.len() == net.layers.len() + 1
            && self.activations[0].len() == net.input_width()
            && net
                .layers
                .iter()
                .zip(&self.activations[1..])
                .all(|(l, a)| a.len() == l.rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients shaped like a [`Network`] plus the input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            input: vec![0.0; net.input_width()],
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
        self.input.fill(0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= factor);
        }
        self.input.iter_mut().for_each(|g| *g *= factor);
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|g| g.is_finite())
    }
}

/// What the gradient handed to backward is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradSeed {
    /// The final layer's activation output.
    Output,
    /// The final layer's pre-activation (fused loss gradients).
    PreActivation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
    lr_multipliers: Vec<f64>,
}

impl Network {
    /// Builds a network from consecutive layers; every learning-rate
    /// multiplier starts at 1.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(FactError::InvalidParameter("network needs at least one layer".into()));
        }
        for l in &layers {
            if l.rows == 0 || l.cols == 0 || l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(FactError::DimensionMismatch {
                    expected: l.rows * l.cols,
                    actual: l.weights.len(),
                });
            }
        }
        for pair in layers.windows(2) {
            if pair[0].rows != pair[1].cols {
                return Err(FactError::DimensionMismatch {
                    expected: pair[0].rows,
                    actual: pair[1].cols,
                });
            }
        }
        if let Some(l) = layers[..layers.len() - 1].iter().find(|l| l.activation == Activation::Softmax) {
            return Err(FactError::InvalidParameter(format!(
                "softmax is only supported on the output layer (found on a {}-wide hidden layer)",
                l.rows
            )));
        }
        let n = layers.len();
        Ok(Self {
            layers,
            lr_multipliers: vec![1.0; n],
        })
    }

    /// Glorot-initialized network with the given widths (`widths[0]` is the
    /// input) and one activation per layer.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if widths.len() != activations.len() + 1 {
            return Err(FactError::DimensionMismatch {
                expected: widths.len().saturating_sub(1),
                actual: activations.len(),
            });
        }
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| Dense::glorot(w[0], w[1], a, rng))
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").rows
    }

    pub fn lr_multipliers(&self) -> &[f64] {
        &self.lr_multipliers
    }

    pub fn set_lr_multiplier(&mut self, layer: usize, multiplier: f64) {
        self.lr_multipliers[layer] = multiplier;
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Forward pass into a reusable cache. The input must already have the
    /// right width; values are not checked for finiteness.
    pub fn forward_into(&self, input: &[f64], cache: &mut ForwardCache) {
        debug_assert!(cache.matches(self));
        cache.activations[0].copy_from_slice(input);
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = cache.activations.split_at_mut(l + 1);
            let out = &mut after[0];
            layer.affine(&before[l], out, &mut cache.nz);
            layer.activation.apply(out);
        }
    }

    /// Like [`Network::forward_into`] but evaluates only the listed units of
    /// the output layer; the other outputs are set to zero. The output
    /// activation must be element-wise.
    pub fn forward_selected_into(&self, input: &[f64], cache: &mut ForwardCache, outputs: &[usize]) -> Result<()> {
        let n = self.layers.len();
        let last = &self.layers[n - 1];
        if last.activation == Activation::Softmax {
            return Err(FactError::InvalidParameter(
                "partial evaluation needs an element-wise output activation".into(),
            ));
        }
        if let Some(&o) = outputs.iter().find(|&&o| o >= last.rows) {
            return Err(FactError::DimensionMismatch {
                expected: last.rows,
                actual: o,
            });
        }
        cache.activations[0].copy_from_slice(input);
        for l in 0..n - 1 {
            let (before, after) = cache.activations.split_at_mut(l + 1);
            let out = &mut after[0];
            self.layers[l].affine(&before[l], out, &mut cache.nz);
            self.layers[l].activation.apply(out);
        }
        let (before, after) = cache.activations.split_at_mut(n);
        let hidden = &before[n - 1];
        let out = &mut after[0];
        out.fill(0.0);
        for &o in outputs {
            let mut z = last.bias[o];
            for (w, x) in last.row(o).iter().zip(hidden) {
                z += w * x;
            }
            out[o] = match last.activation {
                Activation::Relu => z.max(0.0),
                Activation::Sigmoid => sigmoid(z),
                _ => z,
            };
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_width() {
            return Err(FactError::DimensionMismatch {
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(FactError::NonFinite("network input"));
        }
        let mut cache = ForwardCache::for_network(self);
        self.forward_into(input, &mut cache);
        Ok((cache.output().to_vec(), cache))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(y, _)| y)
    }

    /// Accumulates parameter gradients (and the input gradient if
    /// `want_input`) for one sample into `grads`.
    pub fn backward_into(
        &self,
        cache: &mut ForwardCache,
        seed_grad: &[f64],
        seed: GradSeed,
        grads: &mut Gradients,
        want_input: bool,
    ) {
        let n = self.layers.len();
        let mut delta = std::mem::take(&mut cache.delta);
        let mut next = std::mem::take(&mut cache.next_delta);
        delta.clear();
        delta.extend_from_slice(seed_grad);
        if seed == GradSeed::Output {
            self.layers[n - 1].activation.backprop(&cache.activations[n], &mut delta);
        }
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let input = &cache.activations[l];
            let g = &mut grads.layers[l];
            cache.nz.clear();
            cache
                .nz
                .extend(input.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i));
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let gw = &mut g.weights[o * layer.cols..(o + 1) * layer.cols];
                for &i in &cache.nz {
                    gw[i] += d * input[i];
                }
            }
            if l == 0 && !want_input {
                break;
            }
            next.clear();
            next.resize(layer.cols, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (acc, w) in next.iter_mut().zip(layer.row(o)) {
                    *acc += w * d;
                }
            }
            if l == 0 {
                for (gi, v) in grads.input.iter_mut().zip(&next) {
                    *gi += v;
                }
            } else {
                self.layers[l - 1].activation.backprop(&cache.activations[l], &mut next);
            }
            std::mem::swap(&mut delta, &mut next);
        }
        cache.delta = delta;
        cache.next_delta = next;
    }

    /// Gradients of `seed_grad . output` for the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Gradients> {
        if !cache.matches(self) {
            return Err(FactError::InvalidParameter("forward cache does not match network shape".into()));
        }
        if output_grad.len() != self.output_width() {
            return Err(FactError::DimensionMismatch {
                expected: self.output_width(),
                actual: output_grad.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut cache = cache.clone();
        self.backward_into(&mut cache, output_grad, GradSeed::Output, &mut grads, true);
        Ok(grads)
    }

    /// Jacobian of the outputs w.r.t. the input for a cached forward pass,
    /// as `output_width` rows of length `input_width`. Columns where
    /// `columns` is false are left at zero.
    pub fn input_jacobian(&self, cache: &ForwardCache, columns: Option<&[bool]>) -> Vec<Vec<f64>> {
        let n = self.layers.len();
        let r = self.output_width();
        let y = cache.output();
        // d(output)/d(pre-activation of the last layer)
        let mut jac: Vec<Vec<f64>> = (0..r)
            .map(|i| {
                let mut row = vec![0.0; r];
                match self.layers[n - 1].activation {
                    Activation::Softmax => {
                        for (k, slot) in row.iter_mut().enumerate() {
                            let kron = if i == k { 1.0 } else { 0.0 };
                            *slot = y[i] * (kron - y[k]);
                        }
                    }
                    act => {
                        row[i] = 1.0;
                        act.backprop(&y[i..=i], &mut row[i..=i]);
                    }
                }
                row
            })
            .collect();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let mut prev: Vec<Vec<f64>> = vec![vec![0.0; layer.cols]; r];
            for (jrow, prow) in jac.iter().zip(prev.iter_mut()) {
                for (o, &d) in jrow.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let w = layer.row(o);
                    for (p, wc) in prow.iter_mut().zip(w) {
                        *p += wc * d;
                    }
                }
            }
            if l > 0 {
                let act = self.layers[l - 1].activation;
                for prow in &mut prev {
                    act.backprop(&cache.activations[l], prow);
                }
            }
            jac = prev;
        }
        if let Some(mask) = columns {
            for row in &mut jac {
                for (v, &keep) in row.iter_mut().zip(mask) {
                    if !keep {
                        *v = 0.0;
                    }
                }
            }
        }
        jac
    }

    /// Per input coordinate, `sum_i |d y_i / d input|` at `input`.
    pub fn input_sensitivity(&self, input: &[f64]) -> Result<Vec<f64>> {
        let (_, cache) = self.forward(input)?;
        Ok(sensitivity_from_jacobian(&self.input_jacobian(&cache, None)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = NetworkFile {
            version: 1,
            layers: self.layers.clone(),
            multipliers: self.lr_multipliers.clone(),
        };
        let text = serde_json::to_string(&file)?;
        fs::write(path, text).map_err(|e| FactError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FactError::io(path, e))?;
        let file: NetworkFile = serde_json::from_str(&text)?;
        if file.version != 1 {
            return Err(FactError::Checkpoint(format!("unsupported network version {}", file.version)));
        }
        let mut net = Self::from_layers(file.layers)?;
        if file.multipliers.len() != net.layers.len() {
            return Err(FactError::Checkpoint("multiplier count does not match layer count".into()));
        }
        net.lr_multipliers = file.multipliers;
        if !net.is_finite() {
            return Err(FactError::NonFinite("checkpoint parameters"));
        }
        Ok(net)
    }
}

pub fn sensitivity_from_jacobian(jac: &[Vec<f64>]) -> Vec<f64> {
    let width = jac.first().map_or(0, Vec::len);
    let mut out = vec![0.0; width];
    for row in jac {
        for (s, v) in out.iter_mut().zip(row) {
            *s += v.abs();
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    version: u32,
    layers: Vec<Dense>,
    multipliers: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FactError::InvalidParameter(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Adam with bias correction. Each layer's step size is the configured
/// learning rate times that layer's multiplier on the network.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: OptimizerConfig,
    first: Vec<LayerGrad>,
    second: Vec<LayerGrad>,
    step: u64,
}

impl Adam {
    pub fn new(net: &Network, cfg: OptimizerConfig) -> Result<Self> {
        cfg.validate()?;
        let zeros = Gradients::zeros_like(net).layers;
        Ok(Self {
            cfg,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(FactError::NonFinite("gradients"));
        }
        if grads.layers.len() != net.layers.len() || self.first.len() != net.layers.len() {
            return Err(FactError::DimensionMismatch {
                expected: net.layers.len(),
                actual: grads.layers.len(),
            });
        }
        self.step += 1;
        let OptimizerConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.cfg;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let lr = learning_rate * net.lr_multipliers[l];
            let g = &grads.layers[l];
            let (m, v) = (&mut self.first[l], &mut self.second[l]);
            let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for i in 0..p.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    if lr != 0.0 {
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        p[i] -= lr * mh / (vh.sqrt() + epsilon);
                    }
                }
            };
            update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
            update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
        if !net.is_finite() {
            return Err(FactError::NonFinite("parameters after update"));
        }
        Ok(())
    }
}

/// Significance weight of bit `b` (zero-based) in the reconstruction loss:
/// the most significant bit weighs 1, each following bit half as much.
#[inline]
pub fn bit_loss_weight(b: usize) -> f64 {
    (-(b as f64)).exp2()
}

/// Weighted binary cross-entropy between flat `d * bits` buffers.
pub fn weighted_bit_xent_flat(target: &[f64], predicted: &[f64], bits: usize) -> f64 {
    let mut loss = 0.0;
    for (k, (&t, &p)) in target.iter().zip(predicted).enumerate() {
        let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        loss -= bit_loss_weight(k % bits) * (t * p.ln() + (1.0 - t) * (1.0 - p).ln());
    }
    loss
}

/// Gradient of [`weighted_bit_xent_flat`] w.r.t. the logits of a sigmoid
/// output layer: `w_b * (p - t)`.
pub fn weighted_bit_xent_logit_grad(target: &[f64], predicted: &[f64], bits: usize, out: &mut [f64]) {
    for (k, ((&t, &p), g)) in target.iter().zip(predicted).zip(out.iter_mut()).enumerate() {
        *g = bit_loss_weight(k % bits) * (p - t);
    }
}

/// Weighted cross-entropy between an exact target encoding and predicted
/// bit probabilities.
pub fn weighted_bit_xent(target: &BitMatrix, predicted: &BitMatrix) -> Result<f64> {
    if target.n_features() != predicted.n_features() || target.n_bits() != predicted.n_bits() {
        return Err(FactError::DimensionMismatch {
            expected: target.as_slice().len(),
            actual: predicted.as_slice().len(),
        });
    }
    Ok(weighted_bit_xent_flat(target.as_slice(), predicted.as_slice(), target.n_bits()))
}

/// Mean of [`weighted_bit_xent`] over a batch.
pub fn mean_weighted_bit_xent(targets: &[BitMatrix], predicted: &[BitMatrix]) -> Result<f64> {
    if targets.len() != predicted.len() || targets.is_empty() {
        return Err(FactError::DimensionMismatch {
            expected: targets.len(),
            actual: predicted.len(),
        });
    }
    let mut total = 0.0;
    for (t, p) in targets.iter().zip(predicted) {
        total += weighted_bit_xent(t, p)?;
    }
    Ok(total / targets.len() as f64)
}

/// Categorical cross-entropy of softmax(logits) and its logit gradient.
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(FactError::InvalidParameter("need at least two classes".into()));
    }
    if label >= logits.len() {
        return Err(FactError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[label];
    let mut grad: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}
