//! One-hidden-layer autoencoder `x → sigmoid(x·Wₑ + bₑ) → out(ℓ·W_d + b_d)`
//! trained by backpropagation on the batch-mean squared error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sigmoid_in_place, Matrix};
use crate::rng::Rng;
use crate::{Reconstructor, Sign};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Sigmoid,
    /// Linear output, for mean/std normalized data that leaves `(0, 1)`.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseAutoencoder {
    /// `N × H`
    encoder_weights: Matrix,
    encoder_bias: Vec<f64>,
    /// `H × N`
    decoder_weights: Matrix,
    decoder_bias: Vec<f64>,
    output: OutputActivation,
}

/// Gradient of the loss with respect to every parameter, laid out like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub encoder_weights: Matrix,
    pub encoder_bias: Vec<f64>,
    pub decoder_weights: Matrix,
    pub decoder_bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub latent: Matrix,
    pub xhat: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
            ..Self::adam(learning_rate)
        }
    }

    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        Ok(())
    }
}

/// Adam moment accumulators. Empty until the first Adam step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Option<Gradients>,
    pub second_moment: Option<Gradients>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DenseAutoencoder {
    /// Glorot-uniform weights, zero biases.
    pub fn new(n_input: usize, n_hidden: usize, output: OutputActivation, rng: &mut Rng) -> Self {
        let r = (6.0 / (n_input + n_hidden) as f64).sqrt();
        let mut draw = |rows, cols| {
            let data = (0..rows * cols).map(|_| rng.uniform_range(-r, r)).collect();
            Matrix::from_vec(rows, cols, data).expect("sized")
        };
        let encoder_weights = draw(n_input, n_hidden);
        let decoder_weights = draw(n_hidden, n_input);
        DenseAutoencoder {
            encoder_weights,
            encoder_bias: vec![0.0; n_hidden],
            decoder_weights,
            decoder_bias: vec![0.0; n_input],
            output,
        }
    }

    pub fn zeros(n_input: usize, n_hidden: usize, output: OutputActivation) -> Self {
        DenseAutoencoder {
            encoder_weights: Matrix::zeros(n_input, n_hidden),
            encoder_bias: vec![0.0; n_hidden],
            decoder_weights: Matrix::zeros(n_hidden, n_input),
            decoder_bias: vec![0.0; n_input],
            output,
        }
    }

    pub fn from_parts(
        encoder_weights: Matrix,
        encoder_bias: Vec<f64>,
        decoder_weights: Matrix,
        decoder_bias: Vec<f64>,
        output: OutputActivation,
    ) -> Result<Self> {
        let (n, h) = encoder_weights.shape();
        if encoder_bias.len() != h
            || decoder_weights.shape() != (h, n)
            || decoder_bias.len() != n
        {
            return Err(Error::Shape {
                op: "DenseAutoencoder::from_parts",
                left: (n, h),
                right: decoder_weights.shape(),
            });
        }
        let model = DenseAutoencoder {
            encoder_weights,
            encoder_bias,
            decoder_weights,
            decoder_bias,
            output,
        };
        if model.param_slices().iter().any(|s| s.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite {
                op: "DenseAutoencoder::from_parts",
            });
        }
        Ok(model)
    }

    pub fn n_input(&self) -> usize {
        self.encoder_weights.rows()
    }

    pub fn n_hidden(&self) -> usize {
        self.encoder_weights.cols()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn encoder_weights(&self) -> &Matrix {
        &self.encoder_weights
    }

    pub fn encoder_bias(&self) -> &[f64] {
        &self.encoder_bias
    }

    pub fn decoder_weights(&self) -> &Matrix {
        &self.decoder_weights
    }

    pub fn decoder_bias(&self) -> &[f64] {
        &self.decoder_bias
    }

    pub fn forward(&self, x: &Matrix) -> Result<Forward> {
        let mut latent = x.matmul(&self.encoder_weights)?;
        latent.add_row_in_place(&self.encoder_bias)?;
        sigmoid_in_place(&mut latent);
        let mut xhat = latent.matmul(&self.decoder_weights)?;
        xhat.add_row_in_place(&self.decoder_bias)?;
        if self.output == OutputActivation::Sigmoid {
            sigmoid_in_place(&mut xhat);
        }
        Ok(Forward { latent, xhat })
    }

    /// Batch-mean squared error `Σ(x̂ − x)² / (B·N)`.
    pub fn loss(&self, x: &Matrix) -> Result<f64> {
        crate::matrix::mse(&self.forward(x)?.xhat, x)
    }

    /// Gradient of [`loss`](Self::loss) times `sign`: `Positive` points uphill
    /// (descend with it), `Negative` is its exact negation (ascent).
    pub fn gradients(&self, x: &Matrix, sign: Sign) -> Result<Gradients> {
        if x.rows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let Forward { latent, xhat } = self.forward(x)?;
        let scale = 2.0 / x.len() as f64;
        let mut d_out = xhat.zip_map(x, |p, t| scale * (p - t))?;
        if self.output == OutputActivation::Sigmoid {
            d_out = d_out.zip_map(&xhat, |g, y| g * y * (1.0 - y))?;
        }
        let decoder_weights = latent.matmul_tn(&d_out)?;
        let decoder_bias = d_out.column_sums();
        let d_latent = d_out
            .matmul_nt(&self.decoder_weights)?
            .zip_map(&latent, |g, a| g * a * (1.0 - a))?;
        let encoder_weights = x.matmul_tn(&d_latent)?;
        let encoder_bias = d_latent.column_sums();

        let mut grads = Gradients {
            encoder_weights,
            encoder_bias,
            decoder_weights,
            decoder_bias,
        };
        if sign == Sign::Negative {
            grads.negate();
        }
        Ok(grads)
    }

    /// `θ ← θ − lr·g` in place.
    pub fn apply_sgd(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        self.check_shapes(grads)?;
        for (p, g) in self.param_slices_mut().into_iter().zip(grads.slices()) {
            for (x, d) in p.iter_mut().zip(g) {
                *x -= learning_rate * d;
            }
        }
        self.ensure_finite("sgd_step")
    }

    /// Bias-corrected Adam update in place.
    pub fn apply_adam(
        &mut self,
        grads: &Gradients,
        cfg: &OptimizerConfig,
        learning_rate: f64,
        state: &mut OptimizerState,
    ) -> Result<()> {
        self.check_shapes(grads)?;
        let m = state.first_moment.get_or_insert_with(|| grads.zeros_like());
        let v = state.second_moment.get_or_insert_with(|| grads.zeros_like());
        if m.shapes() != grads.shapes() || v.shapes() != grads.shapes() {
            return Err(Error::InvalidArgument(
                "optimizer state does not match model shape".into(),
            ));
        }
        state.step += 1;
        let t = state.step as i32;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let eps = cfg.adam_epsilon;

        let params = self.param_slices_mut();
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads.slices())
            .zip(m.slices_mut())
            .zip(v.slices_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        self.ensure_finite("adam_step")
    }

    /// Returns the model after `θ − lr·g`.
    pub fn sgd_step(&self, grads: &Gradients, cfg: &OptimizerConfig) -> Result<DenseAutoencoder> {
        let mut next = self.clone();
        next.apply_sgd(grads, cfg.learning_rate)?;
        Ok(next)
    }

    pub fn adam_step(
        &self,
        grads: &Gradients,
        cfg: &OptimizerConfig,
        state: &OptimizerState,
    ) -> Result<(DenseAutoencoder, OptimizerState)> {
        let mut next = self.clone();
        let mut state = state.clone();
        next.apply_adam(grads, cfg, cfg.learning_rate, &mut state)?;
        Ok((next, state))
    }

    /// One optimizer update on `batch` in the direction given by `sign`.
    pub fn learn_batch(
        &mut self,
        batch: &Matrix,
        sign: Sign,
        cfg: &OptimizerConfig,
        rate_scale: f64,
        state: &mut OptimizerState,
    ) -> Result<()> {
        let grads = self.gradients(batch, sign)?;
        let lr = cfg.learning_rate * rate_scale;
        match cfg.kind {
            OptimizerKind::Sgd => self.apply_sgd(&grads, lr),
            OptimizerKind::Adam => self.apply_adam(&grads, cfg, lr, state),
        }
    }

    /// Parameters in a fixed order: Wₑ, bₑ, W_d, b_d.
    pub fn param_slices(&self) -> [&[f64]; 4] {
        [
            self.encoder_weights.as_slice(),
            &self.encoder_bias,
            self.decoder_weights.as_slice(),
            &self.decoder_bias,
        ]
    }

    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.encoder_weights.as_mut_slice(),
            &mut self.encoder_bias,
            self.decoder_weights.as_mut_slice(),
            &mut self.decoder_bias,
        ]
    }

    fn check_shapes(&self, grads: &Gradients) -> Result<()> {
        let mine: Vec<usize> = self.param_slices().iter().map(|s| s.len()).collect();
        if mine != grads.shapes() {
            return Err(Error::InvalidArgument(
                "gradient shapes do not match the model".into(),
            ));
        }
        Ok(())
    }

    fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.param_slices().iter().any(|s| s.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite { op });
        }
        Ok(())
    }
}

impl Gradients {
    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.encoder_weights.as_slice(),
            &self.encoder_bias,
            self.decoder_weights.as_slice(),
            &self.decoder_bias,
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.encoder_weights.as_mut_slice(),
            &mut self.encoder_bias,
            self.decoder_weights.as_mut_slice(),
            &mut self.decoder_bias,
        ]
    }

    fn shapes(&self) -> Vec<usize> {
        self.slices().iter().map(|s| s.len()).collect()
    }

    fn zeros_like(&self) -> Gradients {
        Gradients {
            encoder_weights: Matrix::zeros(self.encoder_weights.rows(), self.encoder_weights.cols()),
            encoder_bias: vec![0.0; self.encoder_bias.len()],
            decoder_weights: Matrix::zeros(self.decoder_weights.rows(), self.decoder_weights.cols()),
            decoder_bias: vec![0.0; self.decoder_bias.len()],
        }
    }

    fn negate(&mut self) {
        for s in self.slices_mut() {
            for x in s {
                *x = -*x;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

impl Reconstructor for DenseAutoencoder {
    fn input_width(&self) -> usize {
        self.n_input()
    }

    fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.xhat)
    }

    fn max_abs_param(&self) -> f64 {
        self.param_slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sigmoid_scalar;
    use crate::rng::rng_uniform;

    #[test]
    fn zero_model_outputs_half() {
        let m = DenseAutoencoder::zeros(3, 2, OutputActivation::Sigmoid);
        let x = Matrix::from_rows(&[[0.1, 0.9, 0.3]]).unwrap();
        let f = m.forward(&x).unwrap();
        assert!(f.latent.as_slice().iter().all(|&v| v == 0.5));
        assert!(f.xhat.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    #[allow(clippy::neg_multiply)]
    fn forward_matches_hand_computation() {
        let we = Matrix::from_rows(&[[0.5, -1.0], [0.25, 2.0]]).unwrap();
        let wd = Matrix::from_rows(&[[1.0, -0.5], [0.75, 0.1]]).unwrap();
        let (be, bd) = (vec![0.1, -0.2], vec![0.0, 0.3]);
        let m = DenseAutoencoder::from_parts(we, be, wd, bd, OutputActivation::Sigmoid).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let f = m.forward(&x).unwrap();

        let l0 = sigmoid_scalar(1.0 * 0.5 + 2.0 * 0.25 + 0.1);
        let l1 = sigmoid_scalar(1.0 * -1.0 + 2.0 * 2.0 - 0.2);
        let y0 = sigmoid_scalar(l0 * 1.0 + l1 * 0.75 + 0.0);
        let y1 = sigmoid_scalar(l0 * -0.5 + l1 * 0.1 + 0.3);
        assert!((f.latent.get(0, 0) - l0).abs() < 1e-15);
        assert!((f.latent.get(0, 1) - l1).abs() < 1e-15);
        assert!((f.xhat.get(0, 0) - y0).abs() < 1e-15);
        assert!((f.xhat.get(0, 1) - y1).abs() < 1e-15);
    }

    #[test]
    fn permuting_rows_permutes_outputs() {
        let mut rng = Rng::new(4);
        let m = DenseAutoencoder::new(5, 3, OutputActivation::Identity, &mut rng);
        let x = rng_uniform(&mut rng, 4, 5, -1.0, 1.0).unwrap();
        let perm = [2, 0, 3, 1];
        let y = m.forward(&x).unwrap().xhat;
        let yp = m.forward(&x.select_rows(&perm)).unwrap().xhat;
        assert_eq!(yp, y.select_rows(&perm));
    }

    #[test]
    fn fixed_point_has_zero_gradients() {
        let x = Matrix::from_rows(&[[0.3, -1.2, 2.0]]).unwrap();
        let m = DenseAutoencoder::from_parts(
            Matrix::zeros(3, 2),
            vec![0.0; 2],
            Matrix::zeros(2, 3),
            x.row(0).to_vec(),
            OutputActivation::Identity,
        )
        .unwrap();
        let g = m.gradients(&x, Sign::Positive).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn negative_gradients_are_exact_negation() {
        let mut rng = Rng::new(9);
        let m = DenseAutoencoder::new(4, 3, OutputActivation::Sigmoid, &mut rng);
        let x = rng_uniform(&mut rng, 6, 4, 0.0, 1.0).unwrap();
        let gp = m.gradients(&x, Sign::Positive).unwrap();
        let gn = m.gradients(&x, Sign::Negative).unwrap();
        for (a, b) in gp.slices().iter().zip(gn.slices()) {
            for (p, n) in a.iter().zip(b) {
                assert_eq!(*p, -*n);
            }
        }
    }

    #[test]
    fn sgd_examples() {
        let mut rng = Rng::new(1);
        let m = DenseAutoencoder::new(3, 2, OutputActivation::Sigmoid, &mut rng);
        let x = rng_uniform(&mut rng, 2, 3, 0.0, 1.0).unwrap();
        let zero = m.gradients(&x, Sign::Positive).unwrap().zeros_like();
        assert_eq!(m.sgd_step(&zero, &OptimizerConfig::sgd(0.1)).unwrap(), m);

        // Scalar case on the first encoder weight: θ=1, g=2, lr=0.1 → 0.8.
        let mut one = DenseAutoencoder::zeros(1, 1, OutputActivation::Identity);
        one.param_slices_mut()[0][0] = 1.0;
        let mut g = DenseAutoencoder::zeros(1, 1, OutputActivation::Identity)
            .gradients(&Matrix::filled(1, 1, 0.0), Sign::Positive)
            .unwrap();
        g.encoder_weights.set(0, 0, 2.0);
        let next = one.sgd_step(&g, &OptimizerConfig::sgd(0.1)).unwrap();
        assert!((next.encoder_weights().get(0, 0) - 0.8).abs() < 1e-15);

        // Two half-steps equal one full step on a constant gradient.
        let g = m.gradients(&x, Sign::Positive).unwrap();
        let full = m.sgd_step(&g, &OptimizerConfig::sgd(0.2)).unwrap();
        let half = m
            .sgd_step(&g, &OptimizerConfig::sgd(0.1))
            .unwrap()
            .sgd_step(&g, &OptimizerConfig::sgd(0.1))
            .unwrap();
        for (a, b) in full.param_slices().iter().zip(half.param_slices()) {
            for (p, q) in a.iter().zip(b) {
                assert!((p - q).abs() < 1e-15);
            }
        }
    }

    fn scalar_grads(g: f64) -> (DenseAutoencoder, Gradients) {
        let model = DenseAutoencoder::zeros(1, 1, OutputActivation::Identity);
        let mut grads = model
            .gradients(&Matrix::filled(1, 1, 0.0), Sign::Positive)
            .unwrap();
        grads.encoder_weights.set(0, 0, g);
        (model, grads)
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut rng = Rng::new(2);
        let m = DenseAutoencoder::new(3, 2, OutputActivation::Sigmoid, &mut rng);
        let x = rng_uniform(&mut rng, 2, 3, 0.0, 1.0).unwrap();
        let zero = m.gradients(&x, Sign::Positive).unwrap().zeros_like();
        let (next, state) = m
            .adam_step(&zero, &OptimizerConfig::adam(0.001), &OptimizerState::new())
            .unwrap();
        assert_eq!(next, m);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_is_learning_rate_sized() {
        let cfg = OptimizerConfig::adam(0.001);
        let (model, grads) = scalar_grads(0.5);
        let (next, _) = model.adam_step(&grads, &cfg, &OptimizerState::new()).unwrap();
        let expected = 0.001 * 0.5 / (0.5 + 1e-8);
        assert!((next.encoder_weights().get(0, 0) + expected).abs() < 1e-15);

        for g in [0.01, 1.0, 100.0] {
            let (model, grads) = scalar_grads(g);
            let (next, _) = model.adam_step(&grads, &cfg, &OptimizerState::new()).unwrap();
            let step = -next.encoder_weights().get(0, 0);
            assert!((step / 0.001 - 1.0).abs() <= 1e-6, "g={g} step={step}");
        }
    }

    #[test]
    fn optimizer_config_validation() {
        assert!(OptimizerConfig::adam(0.001).validate().is_ok());
        assert!(OptimizerConfig::sgd(0.0).validate().is_err());
        let mut c = OptimizerConfig::adam(0.1);
        c.adam_beta1 = 1.0;
        assert!(c.validate().is_err());
    }
}
