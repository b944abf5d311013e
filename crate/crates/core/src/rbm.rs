//! Single-layer RBM used as an autoencoder, trained by CD-1.
//!
//! A CD-1 step computes `h₀ = p(h|v₀)`, samples or keeps `h₀` per
//! [`HiddenSampling`], reconstructs `v₁ = p(v|h₀)` and re-encodes
//! `h₁ = p(h|v₁)`. The statistics difference `(v₀ᵀh₀ − v₁ᵀh₁) / B` is scaled by
//! `ζ · learning_rate`; `ζ = −1` pushes the model away from reconstructing
//! the batch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sigmoid_in_place, Matrix};
use crate::rng::Rng;
use crate::{Reconstructor, Sign};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HiddenSampling {
    /// Bernoulli sample of `h₀` drives the reconstruction (standard CD-1).
    StochasticBinary,
    /// Probabilities are used directly; the step is deterministic.
    MeanField,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdConfig {
    pub learning_rate: f64,
    pub zeta: Sign,
    pub hidden_sampling: HiddenSampling,
}

impl Default for CdConfig {
    fn default() -> Self {
        CdConfig {
            learning_rate: 0.1,
            zeta: Sign::Positive,
            hidden_sampling: HiddenSampling::StochasticBinary,
        }
    }
}

impl CdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbmModel {
    /// `n_visible × n_hidden`.
    weights: Matrix,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

/// Parameter change produced by one CD-1 step.
#[derive(Clone, Debug, PartialEq)]
pub struct RbmDelta {
    pub weights: Matrix,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl RbmModel {
    /// Weights uniform in `[-0.01, 0.01)`, biases zero.
    pub fn new(n_visible: usize, n_hidden: usize, rng: &mut Rng) -> Self {
        let data = (0..n_visible * n_hidden)
            .map(|_| rng.uniform_range(-0.01, 0.01))
            .collect();
        RbmModel {
            weights: Matrix::from_vec(n_visible, n_hidden, data).expect("sized"),
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        RbmModel {
            weights: Matrix::zeros(n_visible, n_hidden),
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    pub fn from_parts(weights: Matrix, visible_bias: Vec<f64>, hidden_bias: Vec<f64>) -> Result<Self> {
        if weights.rows() != visible_bias.len() || weights.cols() != hidden_bias.len() {
            return Err(Error::Shape {
                op: "RbmModel::from_parts",
                left: weights.shape(),
                right: (visible_bias.len(), hidden_bias.len()),
            });
        }
        let model = RbmModel {
            weights,
            visible_bias,
            hidden_bias,
        };
        if !model.all_finite() {
            return Err(Error::NonFinite {
                op: "RbmModel::from_parts",
            });
        }
        Ok(model)
    }

    pub fn n_visible(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    /// Hidden probabilities `sigmoid(v·W + c)`.
    pub fn encode(&self, v: &Matrix) -> Result<Matrix> {
        let mut h = v.matmul(&self.weights)?;
        h.add_row_in_place(&self.hidden_bias)?;
        sigmoid_in_place(&mut h);
        Ok(h)
    }

    /// Visible probabilities `sigmoid(h·Wᵀ + b)`.
    pub fn decode(&self, h: &Matrix) -> Result<Matrix> {
        let mut v = h.matmul_nt(&self.weights)?;
        v.add_row_in_place(&self.visible_bias)?;
        sigmoid_in_place(&mut v);
        Ok(v)
    }

    /// Unscaled CD-1 statistics difference for `batch`.
    pub fn cd1_statistics(
        &self,
        batch: &Matrix,
        sampling: HiddenSampling,
        rng: &mut Rng,
    ) -> Result<RbmDelta> {
        if batch.rows() == 0 {
            return Err(Error::InvalidArgument("empty CD-1 batch".into()));
        }
        if batch.as_slice().iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument(
                "RBM inputs must lie in [0, 1]".into(),
            ));
        }
        let h0 = self.encode(batch)?;
        let v1 = match sampling {
            HiddenSampling::MeanField => self.decode(&h0)?,
            HiddenSampling::StochasticBinary => {
                let sample = h0.map(|p| if rng.uniform() < p { 1.0 } else { 0.0 });
                self.decode(&sample)?
            }
        };
        let h1 = self.encode(&v1)?;

        let inv_b = 1.0 / batch.rows() as f64;
        let positive = batch.matmul_tn(&h0)?;
        let negative = v1.matmul_tn(&h1)?;
        let weights = positive.zip_map(&negative, |p, n| (p - n) * inv_b)?;
        let visible_bias = column_mean_difference(batch, &v1);
        let hidden_bias = column_mean_difference(&h0, &h1);
        Ok(RbmDelta {
            weights,
            visible_bias,
            hidden_bias,
        })
    }

    /// One CD-1 step in place with step size `ζ · lr · rate_scale`; returns the
    /// applied parameter change.
    pub fn cd1_step(
        &mut self,
        batch: &Matrix,
        cfg: &CdConfig,
        rate_scale: f64,
        rng: &mut Rng,
    ) -> Result<RbmDelta> {
        let stats = self.cd1_statistics(batch, cfg.hidden_sampling, rng)?;
        let step = cfg.zeta.value() * (cfg.learning_rate * rate_scale);
        let delta = stats.scaled(step);
        for (w, d) in self.weights.as_mut_slice().iter_mut().zip(delta.weights.as_slice()) {
            *w += d;
        }
        for (b, d) in self.visible_bias.iter_mut().zip(&delta.visible_bias) {
            *b += d;
        }
        for (c, d) in self.hidden_bias.iter_mut().zip(&delta.hidden_bias) {
            *c += d;
        }
        if !self.all_finite() {
            return Err(Error::NonFinite { op: "cd1_update" });
        }
        Ok(delta)
    }

    /// Returns the model after one CD-1 step on `batch`.
    pub fn cd1_update(&self, batch: &Matrix, cfg: &CdConfig, rng: &mut Rng) -> Result<RbmModel> {
        cfg.validate()?;
        let mut next = self.clone();
        next.cd1_step(batch, cfg, 1.0, rng)?;
        Ok(next)
    }

    fn all_finite(&self) -> bool {
        self.weights.all_finite()
            && self.visible_bias.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite())
    }
}

impl RbmDelta {
    fn scaled(&self, k: f64) -> RbmDelta {
        RbmDelta {
            weights: self.weights.map(|x| k * x),
            visible_bias: self.visible_bias.iter().map(|x| k * x).collect(),
            hidden_bias: self.hidden_bias.iter().map(|x| k * x).collect(),
        }
    }
}

fn column_mean_difference(a: &Matrix, b: &Matrix) -> Vec<f64> {
    let inv = 1.0 / a.rows() as f64;
    a.column_sums()
        .into_iter()
        .zip(b.column_sums())
        .map(|(x, y)| (x - y) * inv)
        .collect()
}

impl Reconstructor for RbmModel {
    fn input_width(&self) -> usize {
        self.n_visible()
    }

    /// Mean-field `decode(encode(v))`; no sampling.
    fn reconstruct(&self, v: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(v)?)
    }

    fn max_abs_param(&self) -> f64 {
        self.visible_bias
            .iter()
            .chain(&self.hidden_bias)
            .fold(self.weights.max_abs(), |m, x| m.max(x.abs()))
    }
}
