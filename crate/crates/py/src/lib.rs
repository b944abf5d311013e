//! Python bindings: both model types, the interleaved trainer, AUROC and the
//! synthetic texture generator. Matrices cross the boundary as lists of rows.

use neglearn::dense::{DenseAutoencoder as CoreDense, OptimizerConfig, OutputActivation};
use neglearn::format::{AnyModel, ModelFile};
use neglearn::rbm::{CdConfig, HiddenSampling, RbmModel};
use neglearn::trainer::{self, EvalSets, TrainLog, TrainingConfig};
use neglearn::{data, eval, Matrix, Reconstructor, Rng, Sign, Trainable};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: neglearn::Error) -> PyErr {
    match e {
        neglearn::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        neglearn::Error::Diverged { .. } | neglearn::Error::NonFinite { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>, width: usize) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, width));
    }
    Matrix::from_rows(&rows).map_err(py_err)
}

/// `(epoch, positive_dissimilarity, negative_dissimilarity, auroc)` per epoch.
type LogRow = (usize, f64, Option<f64>, Option<f64>);

fn log_rows(log: &TrainLog) -> Vec<LogRow> {
    log.records
        .iter()
        .map(|r| (r.epoch, r.positive_dissimilarity, r.negative_dissimilarity, r.auroc))
        .collect()
}

fn eval_sets(
    width: usize,
    eval_normal: Option<Vec<Vec<f64>>>,
    eval_anomaly: Option<Vec<Vec<f64>>>,
) -> PyResult<Option<EvalSets>> {
    match (eval_normal, eval_anomaly) {
        (Some(n), Some(a)) => Ok(Some(EvalSets {
            normal: matrix(n, width)?,
            anomaly: matrix(a, width)?,
        })),
        (None, None) => Ok(None),
        _ => Err(PyValueError::new_err("pass both eval_normal and eval_anomaly, or neither")),
    }
}

#[allow(clippy::too_many_arguments)]
fn fit<M: Trainable>(
    model: &mut M,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    settings: M::Settings,
    epochs: usize,
    batch_size: usize,
    q_negative: usize,
    negative_rate_ratio: f64,
    seed: u64,
    eval: Option<EvalSets>,
) -> PyResult<Vec<LogRow>> {
    let width = model.input_width();
    let x = matrix(x, width)?;
    let y = matrix(y, width)?;
    let mut cfg = TrainingConfig::new(settings);
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.q_negative = q_negative;
    cfg.negative_rate_ratio = negative_rate_ratio;
    cfg.seed = seed;
    match trainer::train(model.clone(), &x, &y, &cfg, eval.as_ref()) {
        Ok((trained, log)) => {
            *model = trained;
            Ok(log_rows(&log))
        }
        Err(e) => {
            *model = e.last_good;
            Err(py_err(e.source))
        }
    }
}

fn save(model: AnyModel, path: &str) -> PyResult<()> {
    ModelFile {
        model,
        normalization: None,
    }
    .save(path)
    .map_err(py_err)
}

/// Binary RBM trained with one-step contrastive divergence.
#[pyclass(module = "neglearn_py")]
pub struct Rbm {
    inner: RbmModel,
}

#[pymethods]
impl Rbm {
    #[new]
    #[pyo3(signature = (n_visible, n_hidden, seed = 0))]
    fn new(n_visible: usize, n_hidden: usize, seed: u64) -> Self {
        Rbm {
            inner: RbmModel::new(n_visible, n_hidden, &mut Rng::new(seed)),
        }
    }

    #[getter]
    fn n_visible(&self) -> usize {
        self.inner.n_visible()
    }

    #[getter]
    fn n_hidden(&self) -> usize {
        self.inner.n_hidden()
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.weights().to_rows()
    }

    #[getter]
    fn visible_bias(&self) -> Vec<f64> {
        self.inner.visible_bias().to_vec()
    }

    #[getter]
    fn hidden_bias(&self) -> Vec<f64> {
        self.inner.hidden_bias().to_vec()
    }

    /// One CD-1 step; `negative=True` reverses its direction.
    #[pyo3(signature = (batch, learning_rate = 0.1, negative = false, mean_field = false, seed = 0))]
    fn cd1_step(
        &mut self,
        batch: Vec<Vec<f64>>,
        learning_rate: f64,
        negative: bool,
        mean_field: bool,
        seed: u64,
    ) -> PyResult<()> {
        let cfg = cd_config(learning_rate, mean_field, negative);
        cfg.validate().map_err(py_err)?;
        let batch = matrix(batch, self.inner.n_visible())?;
        self.inner
            .cd1_step(&batch, &cfg, 1.0, &mut Rng::new(seed))
            .map(drop)
            .map_err(py_err)
    }

    /// Trains in place with `q_negative` negative passes over `y` before each
    /// positive pass over `x` after the first epoch. Returns the epoch log.
    #[pyo3(signature = (
        x, y = Vec::new(), *, epochs, batch_size = 50, q_negative = 0, learning_rate = 0.1,
        negative_rate_ratio = 1.0, mean_field = false, seed = 0, eval_normal = None, eval_anomaly = None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        epochs: usize,
        batch_size: usize,
        q_negative: usize,
        learning_rate: f64,
        negative_rate_ratio: f64,
        mean_field: bool,
        seed: u64,
        eval_normal: Option<Vec<Vec<f64>>>,
        eval_anomaly: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Vec<LogRow>> {
        let eval = eval_sets(self.inner.n_visible(), eval_normal, eval_anomaly)?;
        let settings = cd_config(learning_rate, mean_field, false);
        fit(&mut self.inner, x, y, settings, epochs, batch_size, q_negative, negative_rate_ratio, seed, eval)
    }

    fn reconstruct(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(x, self.inner.n_visible())?;
        Ok(self.inner.reconstruct(&x).map_err(py_err)?.to_rows())
    }

    /// Per-row reconstruction MSE.
    fn dissimilarities(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = matrix(x, self.inner.n_visible())?;
        eval::dissimilarities(&self.inner, &x).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save(AnyModel::Rbm(self.inner.clone()), path)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        match ModelFile::load(path).map_err(py_err)?.model {
            AnyModel::Rbm(inner) => Ok(Rbm { inner }),
            AnyModel::Dense(_) => Err(PyValueError::new_err(format!("{path} holds a dense autoencoder"))),
        }
    }
}

fn cd_config(learning_rate: f64, mean_field: bool, negative: bool) -> CdConfig {
    CdConfig {
        learning_rate,
        zeta: if negative { Sign::Negative } else { Sign::Positive },
        hidden_sampling: if mean_field {
            HiddenSampling::MeanField
        } else {
            HiddenSampling::StochasticBinary
        },
    }
}

fn output_activation(name: &str) -> PyResult<OutputActivation> {
    match name {
        "sigmoid" => Ok(OutputActivation::Sigmoid),
        "identity" => Ok(OutputActivation::Identity),
        other => Err(PyValueError::new_err(format!(
            "output must be \"sigmoid\" or \"identity\", got {other:?}"
        ))),
    }
}

/// One-hidden-layer autoencoder trained by backpropagation.
#[pyclass(module = "neglearn_py")]
pub struct DenseAutoencoder {
    inner: CoreDense,
}

#[pymethods]
impl DenseAutoencoder {
    #[new]
    #[pyo3(signature = (n_input, n_hidden, output = "sigmoid", seed = 0))]
    fn new(n_input: usize, n_hidden: usize, output: &str, seed: u64) -> PyResult<Self> {
        Ok(DenseAutoencoder {
            inner: CoreDense::new(n_input, n_hidden, output_activation(output)?, &mut Rng::new(seed)),
        })
    }

    #[getter]
    fn n_input(&self) -> usize {
        self.inner.n_input()
    }

    #[getter]
    fn n_hidden(&self) -> usize {
        self.inner.n_hidden()
    }

    /// Mean squared reconstruction error over all of `x`.
    fn loss(&self, x: Vec<Vec<f64>>) -> PyResult<f64> {
        let x = matrix(x, self.inner.n_input())?;
        self.inner.loss(&x).map_err(py_err)
    }

    /// Trains in place; `optimizer` is `"adam"` or `"sgd"`. Returns the epoch
    /// log.
    #[pyo3(signature = (
        x, y = Vec::new(), *, epochs, batch_size = 32, q_negative = 0, optimizer = "adam",
        learning_rate = 0.001, negative_rate_ratio = 1.0, seed = 0, eval_normal = None, eval_anomaly = None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        epochs: usize,
        batch_size: usize,
        q_negative: usize,
        optimizer: &str,
        learning_rate: f64,
        negative_rate_ratio: f64,
        seed: u64,
        eval_normal: Option<Vec<Vec<f64>>>,
        eval_anomaly: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Vec<LogRow>> {
        let settings = match optimizer {
            "adam" => OptimizerConfig::adam(learning_rate),
            "sgd" => OptimizerConfig::sgd(learning_rate),
            other => {
                return Err(PyValueError::new_err(format!(
                    "optimizer must be \"adam\" or \"sgd\", got {other:?}"
                )))
            }
        };
        let eval = eval_sets(self.inner.n_input(), eval_normal, eval_anomaly)?;
        fit(&mut self.inner, x, y, settings, epochs, batch_size, q_negative, negative_rate_ratio, seed, eval)
    }

    fn reconstruct(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(x, self.inner.n_input())?;
        Ok(self.inner.reconstruct(&x).map_err(py_err)?.to_rows())
    }

    /// Per-row reconstruction MSE.
    fn dissimilarities(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = matrix(x, self.inner.n_input())?;
        eval::dissimilarities(&self.inner, &x).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save(AnyModel::Dense(self.inner.clone()), path)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        match ModelFile::load(path).map_err(py_err)?.model {
            AnyModel::Dense(inner) => Ok(DenseAutoencoder { inner }),
            AnyModel::Rbm(_) => Err(PyValueError::new_err(format!("{path} holds an RBM"))),
        }
    }
}

/// Area under the ROC curve, anomalies being the positive class.
#[pyfunction]
fn auroc(normal: Vec<f64>, anomaly: Vec<f64>) -> PyResult<f64> {
    eval::auroc(&normal, &anomaly).map_err(py_err)
}

/// `n` synthetic road-surface patches of `size × size` pixels in `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (n, size = 32, seed = 0))]
fn road_patches(n: usize, size: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let d = data::texture::road_patches(n, size, &mut Rng::new(seed)).map_err(py_err)?;
    Ok(d.samples.to_rows())
}

#[pymodule]
fn neglearn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Rbm>()?;
    m.add_class::<DenseAutoencoder>()?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(road_patches, m)?)?;
    Ok(())
}
