//! Negative learning for reconstruction-based anomaly detection.
//!
//! Two autoencoder families are provided: an RBM trained by CD-1
//! ([`rbm::RbmModel`]) and a one-hidden-layer backprop autoencoder
//! ([`dense::DenseAutoencoder`]). The [`trainer`] interleaves ordinary
//! reconstruction learning on normal data with sign-flipped passes over known
//! anomalies, so that the trained model reconstructs normal inputs well and
//! anomalies badly. Per-sample reconstruction error is then the anomaly score
//! ([`eval`]).

// Validation uses `!(x > 0.0)` and friends on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dense;
pub mod error;
pub mod eval;
pub mod format;
pub mod matrix;
pub mod rbm;
pub mod rng;
pub mod trainer;

use serde::{Deserialize, Serialize};

pub use crate::error::{Error, Result};
pub use crate::matrix::Matrix;
pub use crate::rng::Rng;

/// Direction of a learning step: `Positive` reduces reconstruction error on the
/// batch, `Negative` increases it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// A model that maps inputs back into input space.
pub trait Reconstructor {
    fn input_width(&self) -> usize;

    /// Deterministic reconstruction of every row of `x`.
    fn reconstruct(&self, x: &Matrix) -> Result<Matrix>;

    /// Largest absolute parameter value; used to detect divergence.
    fn max_abs_param(&self) -> f64;
}

/// A model the [`trainer`] can drive.
pub trait Trainable: Reconstructor + Clone {
    type Settings: Clone + std::fmt::Debug;
    type State: Default;

    fn validate_settings(settings: &Self::Settings) -> Result<()>;

    /// One mini-batch update in direction `sign`, with the configured step
    /// size multiplied by `rate_scale`.
    fn learn_batch(
        &mut self,
        batch: &Matrix,
        sign: Sign,
        settings: &Self::Settings,
        rate_scale: f64,
        state: &mut Self::State,
        rng: &mut Rng,
    ) -> Result<()>;
}

impl Trainable for rbm::RbmModel {
    type Settings = rbm::CdConfig;
    type State = ();

    fn validate_settings(settings: &rbm::CdConfig) -> Result<()> {
        settings.validate()
    }

    fn learn_batch(
        &mut self,
        batch: &Matrix,
        sign: Sign,
        settings: &rbm::CdConfig,
        rate_scale: f64,
        _state: &mut (),
        rng: &mut Rng,
    ) -> Result<()> {
        let cfg = rbm::CdConfig {
            zeta: sign,
            ..*settings
        };
        self.cd1_step(batch, &cfg, rate_scale, rng).map(drop)
    }
}

impl Trainable for dense::DenseAutoencoder {
    type Settings = dense::OptimizerConfig;
    type State = dense::OptimizerState;

    fn validate_settings(settings: &dense::OptimizerConfig) -> Result<()> {
        settings.validate()
    }

    fn learn_batch(
        &mut self,
        batch: &Matrix,
        sign: Sign,
        settings: &dense::OptimizerConfig,
        rate_scale: f64,
        state: &mut dense::OptimizerState,
        _rng: &mut Rng,
    ) -> Result<()> {
        dense::DenseAutoencoder::learn_batch(self, batch, sign, settings, rate_scale, state)
    }
}
