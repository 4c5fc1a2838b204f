//! Fixed-point binary words for feature values in `[0, 1)`.
//!
//! Every feature is represented by `l` fractional bits with weights
//! `2^-1 .. 2^-l`, so the representable grid is `{m / 2^l : 0 <= m < 2^l}`
//! and the largest representable value is `1 - 2^-l`. Unknown features are
//! encoded as an all-zero word.

use serde::{Deserialize, Serialize};

use crate::error::{FactError, Result};

/// Bits per feature word used throughout unless configured otherwise.
pub const DEFAULT_BITS: usize = 8;

/// Largest value representable with `bits` fractional bits.
pub fn max_representable(bits: usize) -> f64 {
    1.0 - (-(bits as f64)).exp2()
}

/// Clamps `value` onto `[0, 1 - 2^-bits]`.
pub fn clamp_representable(value: f64, bits: usize) -> f64 {
    value.clamp(0.0, max_representable(bits))
}

/// Weight of bit `b` (zero-based, most significant first): `2^-(b+1)`.
#[inline]
pub fn bit_weight(b: usize) -> f64 {
    (-((b + 1) as f64)).exp2()
}

/// Known/unknown flags for each feature; `true` means known.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskVector(Vec<bool>);

impl MaskVector {
    pub fn all_unknown(d: usize) -> Self {
        Self(vec![false; d])
    }

    pub fn all_known(d: usize) -> Self {
        Self(vec![true; d])
    }

    pub fn from_flags(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn is_known(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn set_known(&mut self, j: usize) {
        self.0[j] = true;
    }

    pub fn set_unknown(&mut self, j: usize) {
        self.0[j] = false;
    }

    pub fn known_count(&self) -> usize {
        self.0.iter().filter(|&&k| k).count()
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    /// True if every feature known here is also known in `later`.
    pub fn is_subset_of(&self, later: &MaskVector) -> bool {
        self.0.len() == later.0.len() && self.0.iter().zip(&later.0).all(|(&a, &b)| !a || b)
    }

    /// Indices that differ between two masks of equal length.
    pub fn difference(&self, other: &MaskVector) -> Vec<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(j, _)| j)
            .collect()
    }
}

/// A `d x l` matrix of bit values, row-major by feature.
///
/// Entries are exactly 0 or 1 for encodings produced by [`quantize`] and lie
/// in `[0, 1]` for probabilistic reconstructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitMatrix {
    bits: Vec<f64>,
    n_features: usize,
    n_bits: usize,
}

impl BitMatrix {
    pub fn zeros(n_features: usize, n_bits: usize) -> Self {
        Self {
            bits: vec![0.0; n_features * n_bits],
            n_features,
            n_bits,
        }
    }

    pub fn from_flat(bits: Vec<f64>, n_features: usize, n_bits: usize) -> Result<Self> {
        if bits.len() != n_features * n_bits {
            return Err(FactError::DimensionMismatch {
                expected: n_features * n_bits,
                actual: bits.len(),
            });
        }
        if let Some(v) = bits.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(FactError::InvalidParameter(format!(
                "bit value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            bits,
            n_features,
            n_bits,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.bits
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.bits
    }

    pub fn word(&self, j: usize) -> &[f64] {
        &self.bits[j * self.n_bits..(j + 1) * self.n_bits]
    }

    pub fn get(&self, j: usize, b: usize) -> f64 {
        self.bits[j * self.n_bits + b]
    }

    pub fn set(&mut self, j: usize, b: usize, value: f64) {
        self.bits[j * self.n_bits + b] = value;
    }
}

/// Writes the word for a single value into `out` by greedy bit-by-bit expansion.
#[inline]
pub fn encode_value_into(value: f64, out: &mut [f64]) {
    let mut remainder = value;
    for (b, slot) in out.iter_mut().enumerate() {
        let w = bit_weight(b);
        if remainder >= w {
            *slot = 1.0;
            remainder -= w;
        } else {
            *slot = 0.0;
        }
    }
}

/// Decodes one word as the weighted sum of its bit values.
#[inline]
pub fn decode_word(word: &[f64]) -> f64 {
    word.iter().enumerate().map(|(b, &v)| v * bit_weight(b)).sum()
}

/// Encodes `x` under `mask` into a flat `d * bits` buffer. No range checks.
pub(crate) fn quantize_into(x: &[f64], mask: &MaskVector, bits: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), x.len() * bits);
    for (j, chunk) in out.chunks_exact_mut(bits).enumerate() {
        if mask.is_known(j) {
            encode_value_into(x[j], chunk);
        } else {
            chunk.fill(0.0);
        }
    }
}

/// Binary representation of `x` with unknown features zeroed.
pub fn quantize(x: &[f64], mask: &MaskVector, bits: usize) -> Result<BitMatrix> {
    if x.len() != mask.len() {
        return Err(FactError::DimensionMismatch {
            expected: mask.len(),
            actual: x.len(),
        });
    }
    if bits == 0 || bits > 52 {
        return Err(FactError::InvalidParameter(format!(
            "bit count {bits} outside 1..=52"
        )));
    }
    let max = max_representable(bits);
    for (j, &v) in x.iter().enumerate() {
        if mask.is_known(j) && !(0.0..=max).contains(&v) {
            return Err(FactError::OutOfRange {
                feature: j,
                value: v,
                max,
            });
        }
    }
    let mut out = BitMatrix::zeros(x.len(), bits);
    quantize_into(x, mask, bits, &mut out.bits);
    Ok(out)
}

/// Expected value decode: `x_j = sum_b bits[j, b] * 2^-(b+1)`.
pub fn dequantize(bits: &BitMatrix) -> Result<Vec<f64>> {
    if bits.bits.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(FactError::InvalidParameter(
            "bit matrix entries must lie in [0, 1]".into(),
        ));
    }
    Ok(bits.bits.chunks_exact(bits.n_bits).map(decode_word).collect())
}
