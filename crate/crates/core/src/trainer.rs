//! Interleaved positive/negative training.
//!
//! Epoch 1 is a single positive pass over the normal data `X`. Every later
//! epoch runs `q_negative` negative passes over the anomaly data `Y` followed
//! by one positive pass over `X`, so the phase sequence is `P, (N×Q, P)*` and
//! training always ends on a positive pass. With `q_negative == 0` this is
//! plain reconstruction training for `epochs` passes.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{auroc, dissimilarities};
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::{Sign, Trainable};

/// Any parameter beyond this magnitude aborts training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig<S> {
    pub epochs: usize,
    pub batch_size: usize,
    /// Negative passes per positive pass.
    pub q_negative: usize,
    pub settings: S,
    pub seed: u64,
    pub shuffle: bool,
    /// Step-size multiplier applied during negative passes.
    pub negative_rate_ratio: f64,
    /// Let both phases update one optimizer state instead of keeping one per
    /// phase. Irrelevant for stateless optimizers and when `q_negative` is 0.
    #[serde(default)]
    pub shared_optimizer_state: bool,
}

impl<S> TrainingConfig<S> {
    pub fn new(settings: S) -> Self {
        TrainingConfig {
            epochs: 1,
            batch_size: 32,
            q_negative: 0,
            settings,
            seed: 0,
            shuffle: true,
            negative_rate_ratio: 1.0,
            shared_optimizer_state: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.negative_rate_ratio > 0.0) || !self.negative_rate_ratio.is_finite() {
            return Err(Error::InvalidArgument(
                "negative_rate_ratio must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean reconstruction MSE over the normal training set.
    pub positive_dissimilarity: f64,
    /// Mean reconstruction MSE over the anomaly training set, if any.
    pub negative_dissimilarity: Option<f64>,
    /// AUROC on the held-out evaluation sets, if provided.
    pub auroc: Option<f64>,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// Every pass in execution order.
    pub phases: Vec<Phase>,
}

impl TrainLog {
    /// CSV without the timing column, so identical runs give identical bytes.
    pub fn to_csv(&self) -> String {
        self.csv(false)
    }

    pub fn to_csv_with_timing(&self) -> String {
        self.csv(true)
    }

    fn csv(&self, timing: bool) -> String {
        let mut out = String::from("epoch,positive_dissimilarity,negative_dissimilarity,auroc");
        if timing {
            out.push_str(",wall_clock_secs");
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            let _ = write!(
                out,
                "{},{:e},{},{}",
                r.epoch,
                r.positive_dissimilarity,
                opt(r.negative_dissimilarity),
                opt(r.auroc)
            );
            if timing {
                let _ = write!(out, ",{:.3}", r.wall_clock_secs);
            }
            out.push('\n');
        }
        out
    }

    /// JSON with wall-clock times zeroed; see [`to_csv`](Self::to_csv).
    pub fn to_json(&self) -> Result<String> {
        let mut clean = self.clone();
        clean.records.iter_mut().for_each(|r| r.wall_clock_secs = 0.0);
        Ok(serde_json::to_string_pretty(&clean)?)
    }
}

/// Held-out data for per-epoch AUROC.
#[derive(Clone, Debug)]
pub struct EvalSets {
    pub normal: Matrix,
    pub anomaly: Matrix,
}

/// Training failed; carries the last model that completed an epoch cleanly.
#[derive(Debug)]
pub struct TrainError<M> {
    /// Epoch during which training failed (0 = before the first epoch).
    pub epoch: usize,
    pub last_good: M,
    pub log: TrainLog,
    pub source: Error,
}

impl<M> TrainError<M> {
    pub fn is_divergence(&self) -> bool {
        matches!(self.source, Error::Diverged { .. } | Error::NonFinite { .. })
    }
}

impl<M: std::fmt::Debug> std::fmt::Display for TrainError<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training failed in epoch {}: {}", self.epoch, self.source)
    }
}

impl<M: std::fmt::Debug> std::error::Error for TrainError<M> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// A model together with its optimizer state and random stream.
pub struct Session<M: Trainable> {
    model: M,
    state: M::State,
    negative_state: M::State,
    rng: Rng,
    cfg: TrainingConfig<M::Settings>,
    phases: Vec<Phase>,
}

impl<M: Trainable> Session<M> {
    pub fn new(model: M, cfg: TrainingConfig<M::Settings>) -> Result<Self> {
        cfg.validate()?;
        M::validate_settings(&cfg.settings)?;
        Ok(Session {
            model,
            state: M::State::default(),
            negative_state: M::State::default(),
            rng: Rng::new(cfg.seed),
            cfg,
            phases: Vec::new(),
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn into_model(self) -> M {
        self.model
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// One pass over `x` reducing reconstruction error.
    pub fn positive_learning(&mut self, x: &Matrix) -> Result<()> {
        self.pass(x, Sign::Positive, 1.0)?;
        self.phases.push(Phase::Positive);
        Ok(())
    }

    /// One pass over `y` increasing reconstruction error, with the step size
    /// scaled by `negative_rate_ratio`.
    pub fn negative_learning(&mut self, y: &Matrix) -> Result<()> {
        self.pass(y, Sign::Negative, self.cfg.negative_rate_ratio)?;
        self.phases.push(Phase::Negative);
        Ok(())
    }

    fn pass(&mut self, data: &Matrix, sign: Sign, rate_scale: f64) -> Result<()> {
        if data.rows() == 0 {
            return Err(Error::InsufficientData("learning pass over empty data".into()));
        }
        if data.cols() != self.model.input_width() {
            return Err(Error::Shape {
                op: "learning pass",
                left: data.shape(),
                right: (data.rows(), self.model.input_width()),
            });
        }
        let order: Vec<usize> = if self.cfg.shuffle {
            self.rng.permutation(data.rows())
        } else {
            (0..data.rows()).collect()
        };
        let state = match sign {
            Sign::Negative if !self.cfg.shared_optimizer_state => &mut self.negative_state,
            _ => &mut self.state,
        };
        for chunk in order.chunks(self.cfg.batch_size) {
            let batch = data.select_rows(chunk);
            self.model.learn_batch(
                &batch,
                sign,
                &self.cfg.settings,
                rate_scale,
                state,
                &mut self.rng,
            )?;
            let max_abs = self.model.max_abs_param();
            if !(max_abs <= DIVERGENCE_LIMIT) {
                return Err(Error::Diverged {
                    max_abs,
                    limit: DIVERGENCE_LIMIT,
                });
            }
        }
        Ok(())
    }
}

/// Runs the full interleaved schedule. See [`train_with_hook`].
pub fn train<M: Trainable>(
    model: M,
    x: &Matrix,
    y: &Matrix,
    cfg: &TrainingConfig<M::Settings>,
    eval: Option<&EvalSets>,
) -> std::result::Result<(M, TrainLog), TrainError<M>> {
    train_with_hook(model, x, y, cfg, eval, |_, _| Ok(()))
}

/// Like [`train`], calling `hook` after every completed epoch. A hook error
/// stops training.
pub fn train_with_hook<M: Trainable>(
    model: M,
    x: &Matrix,
    y: &Matrix,
    cfg: &TrainingConfig<M::Settings>,
    eval: Option<&EvalSets>,
    mut hook: impl FnMut(&M, &EpochRecord) -> Result<()>,
) -> std::result::Result<(M, TrainLog), TrainError<M>> {
    let mut log = TrainLog::default();
    let fail = |epoch, last_good, log, source| TrainError {
        epoch,
        last_good,
        log,
        source,
    };
    if x.rows() == 0 {
        let e = Error::InsufficientData("normal training set is empty".into());
        return Err(fail(0, model, log, e));
    }
    if cfg.q_negative > 0 && y.rows() == 0 {
        let e = Error::InsufficientData("anomaly set is empty but q_negative > 0".into());
        return Err(fail(0, model, log, e));
    }
    let mut session = match Session::new(model.clone(), cfg.clone()) {
        Ok(s) => s,
        Err(e) => return Err(fail(0, model, log, e)),
    };

    let started = Instant::now();
    let mut last_good = model;
    for epoch in 1..=cfg.epochs {
        let outcome = run_epoch(&mut session, epoch, x, y, cfg.q_negative)
            .and_then(|()| record(session.model(), epoch, x, y, eval, started));
        let rec = match outcome {
            Ok(rec) => rec,
            Err(e) => {
                log.phases = session.phases().to_vec();
                return Err(fail(epoch, last_good, log, e));
            }
        };
        if let Err(e) = hook(session.model(), &rec) {
            log.phases = session.phases().to_vec();
            return Err(fail(epoch, session.into_model(), log, e));
        }
        log.records.push(rec);
        last_good = session.model().clone();
    }
    log.phases = session.phases().to_vec();
    Ok((session.into_model(), log))
}

fn run_epoch<M: Trainable>(
    session: &mut Session<M>,
    epoch: usize,
    x: &Matrix,
    y: &Matrix,
    q_negative: usize,
) -> Result<()> {
    if epoch > 1 {
        for _ in 0..q_negative {
            session.negative_learning(y)?;
        }
    }
    session.positive_learning(x)
}

fn record<M: Trainable>(
    model: &M,
    epoch: usize,
    x: &Matrix,
    y: &Matrix,
    eval: Option<&EvalSets>,
    started: Instant,
) -> Result<EpochRecord> {
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let positive_dissimilarity = mean(dissimilarities(model, x)?);
    let negative_dissimilarity = if y.rows() > 0 {
        Some(mean(dissimilarities(model, y)?))
    } else {
        None
    };
    let auroc = match eval {
        Some(sets) => Some(auroc(
            &dissimilarities(model, &sets.normal)?,
            &dissimilarities(model, &sets.anomaly)?,
        )?),
        None => None,
    };
    Ok(EpochRecord {
        epoch,
        positive_dissimilarity,
        negative_dissimilarity,
        auroc,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{DenseAutoencoder, OptimizerConfig, OutputActivation};
    use crate::matrix::mse;
    use crate::rbm::{CdConfig, HiddenSampling, RbmModel};
    use crate::Reconstructor;

    fn patterns() -> Matrix {
        Matrix::from_rows(&[
            [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    fn anomalies() -> Matrix {
        Matrix::from_rows(&[
            [1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    fn dense_cfg(q: usize) -> TrainingConfig<OptimizerConfig> {
        TrainingConfig {
            epochs: 5,
            batch_size: 3,
            q_negative: q,
            settings: OptimizerConfig::sgd(0.05),
            seed: 3,
            shuffle: true,
            negative_rate_ratio: 1.0,
            shared_optimizer_state: false,
        }
    }

    fn error_on<M: Reconstructor>(m: &M, x: &Matrix) -> f64 {
        mse(&m.reconstruct(x).unwrap(), x).unwrap()
    }

    #[test]
    fn positive_pass_reduces_error() {
        let x = patterns();
        let mut rng = Rng::new(1);
        let model = DenseAutoencoder::new(6, 4, OutputActivation::Sigmoid, &mut rng);
        let before = error_on(&model, &x);
        let mut s = Session::new(model, dense_cfg(0)).unwrap();
        s.positive_learning(&x).unwrap();
        assert!(error_on(s.model(), &x) <= before);
    }

    #[test]
    fn negative_pass_increases_error() {
        let y = anomalies();
        let mut rng = Rng::new(2);
        let model = DenseAutoencoder::new(6, 4, OutputActivation::Sigmoid, &mut rng);
        let before = error_on(&model, &y);
        let mut s = Session::new(model, dense_cfg(1)).unwrap();
        s.negative_learning(&y).unwrap();
        assert!(error_on(s.model(), &y) >= before);
    }

    #[test]
    fn rbm_passes_move_error_in_opposite_directions() {
        let x = patterns();
        let mut rng = Rng::new(4);
        let model = RbmModel::new(6, 4, &mut rng);
        let cfg = TrainingConfig {
            batch_size: 8,
            settings: CdConfig {
                learning_rate: 0.05,
                zeta: Sign::Positive,
                hidden_sampling: HiddenSampling::MeanField,
            },
            shuffle: false,
            ..TrainingConfig::new(CdConfig::default())
        };
        let before = error_on(&model, &x);
        let mut pos = Session::new(model.clone(), cfg.clone()).unwrap();
        pos.positive_learning(&x).unwrap();
        assert!(error_on(pos.model(), &x) < before);
        let mut neg = Session::new(model, cfg).unwrap();
        neg.negative_learning(&x).unwrap();
        assert!(error_on(neg.model(), &x) > before);
    }

    #[test]
    fn short_tail_batch_is_processed() {
        // 8 rows at batch 3 → batches of 3, 3, 2. Skipping the tail would leave
        // a model identical to one trained on the first 6 rows only.
        let x = patterns();
        let cfg = TrainingConfig {
            shuffle: false,
            ..dense_cfg(0)
        };
        let mut rng = Rng::new(5);
        let model = DenseAutoencoder::new(6, 3, OutputActivation::Sigmoid, &mut rng);
        let mut full = Session::new(model.clone(), cfg.clone()).unwrap();
        full.positive_learning(&x).unwrap();
        let mut head = Session::new(model, cfg).unwrap();
        head.positive_learning(&x.slice_rows(0, 6)).unwrap();
        assert_ne!(full.model(), head.model());
        let mut manual = head.into_model();
        let grads = manual.gradients(&x.slice_rows(6, 8), Sign::Positive).unwrap();
        manual.apply_sgd(&grads, 0.05).unwrap();
        assert_eq!(full.model(), &manual);
    }

    #[test]
    fn phase_sequence_follows_schedule() {
        let mut rng = Rng::new(6);
        let model = DenseAutoencoder::new(6, 3, OutputActivation::Sigmoid, &mut rng);
        let cfg = TrainingConfig {
            epochs: 4,
            ..dense_cfg(2)
        };
        let (_, log) = train(model, &patterns(), &anomalies(), &cfg, None).unwrap();
        use Phase::{Negative as N, Positive as P};
        assert_eq!(log.phases, vec![P, N, N, P, N, N, P, N, N, P]);
        assert_eq!(log.records.len(), 4);
        assert!(log.records.iter().all(|r| r.negative_dissimilarity.is_some()));
    }

    #[test]
    fn zero_q_never_runs_negative_passes() {
        let mut rng = Rng::new(7);
        let model = DenseAutoencoder::new(6, 3, OutputActivation::Sigmoid, &mut rng);
        let (_, log) = train(model, &patterns(), &Matrix::zeros(0, 6), &dense_cfg(0), None).unwrap();
        assert!(log.phases.iter().all(|&p| p == Phase::Positive));
        assert_eq!(log.phases.len(), 5);
        assert!(log.records.iter().all(|r| r.negative_dissimilarity.is_none()));
    }

    #[test]
    fn same_seed_same_log_and_model() {
        let mut rng = Rng::new(8);
        let model = DenseAutoencoder::new(6, 3, OutputActivation::Sigmoid, &mut rng);
        let eval = EvalSets {
            normal: patterns(),
            anomaly: anomalies(),
        };
        let a = train(model.clone(), &patterns(), &anomalies(), &dense_cfg(1), Some(&eval)).unwrap();
        let b = train(model, &patterns(), &anomalies(), &dense_cfg(1), Some(&eval)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.to_csv(), b.1.to_csv());
        assert_eq!(a.1.to_json().unwrap(), b.1.to_json().unwrap());
    }

    #[test]
    fn divergence_returns_last_good_model() {
        let mut rng = Rng::new(9);
        let model = DenseAutoencoder::new(6, 3, OutputActivation::Identity, &mut rng);
        let cfg = TrainingConfig {
            epochs: 200,
            q_negative: 5,
            settings: OptimizerConfig::sgd(0.5),
            negative_rate_ratio: 50.0,
            ..dense_cfg(5)
        };
        let err = train(model, &patterns(), &anomalies(), &cfg, None).unwrap_err();
        assert!(err.is_divergence(), "{}", err.source);
        assert!(err.epoch >= 2);
        assert_eq!(err.log.records.len(), err.epoch - 1);
        assert!(err.last_good.max_abs_param() <= DIVERGENCE_LIMIT);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let mut rng = Rng::new(10);
        let model = DenseAutoencoder::new(6, 3, OutputActivation::Sigmoid, &mut rng);
        let empty = Matrix::zeros(0, 6);
        assert!(train(model.clone(), &empty, &anomalies(), &dense_cfg(1), None).is_err());
        assert!(train(model.clone(), &patterns(), &empty, &dense_cfg(1), None).is_err());
        let bad = TrainingConfig {
            epochs: 0,
            ..dense_cfg(0)
        };
        assert!(train(model, &patterns(), &empty, &bad, None).is_err());
    }
}
