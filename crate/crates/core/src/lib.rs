//! Test-time feature acquisition under per-feature costs.
//!
//! A denoising autoencoder over fixed-point binary feature words estimates,
//! for every unknown feature, the probability of each bit being set given
//! the currently known features. A predictor fine-tuned from the encoder
//! supplies the sensitivity of its class probabilities to every input bit.
//! The next feature to acquire maximizes the probability-weighted
//! sensitivity divided by its cost.

pub mod acquire;
pub mod baselines;
pub mod codec;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;

pub use codec::{BitMatrix, MaskVector, DEFAULT_BITS};
pub use data::{AcquisitionUnits, CostSchedule, Dataset, NormalizationSpec, SplitSpec, Splits};
pub use error::{FactError, Result};
pub use nn::{Activation, Adam, Network, OptimizerConfig};
