//! Dataset ingestion and preparation.

pub mod cifar;
pub mod idx;
pub mod patches;
pub mod pgm;
pub mod texture;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

pub use cifar::load_cifar10;
pub use idx::load_idx;
pub use patches::{extract_patches, FEATURELESS_STD};
pub use pgm::load_pgm;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub mean: f64,
    pub std: f64,
}

impl NormalizationRecord {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    pub image_height: usize,
    pub image_width: usize,
    pub normalization: Option<NormalizationRecord>,
}

impl DatasetMeta {
    pub fn new(source: impl Into<String>, image_height: usize, image_width: usize) -> Self {
        DatasetMeta {
            source: source.into(),
            image_height,
            image_width,
            normalization: None,
        }
    }
}

/// Flattened images, one per row, with optional integer labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Matrix,
    pub labels: Option<Vec<u32>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn unlabeled(samples: Matrix, meta: DatasetMeta) -> Self {
        Dataset {
            samples,
            labels: None,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.samples.cols()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: self.samples.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            meta: self.meta.clone(),
        }
    }

    /// The first `n` rows (all of them if fewer).
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// Rows whose label is in `include`, in original order.
    pub fn filter_labels(&self, include: &[u32]) -> Result<Dataset> {
        let labels = self.labels.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("dataset {} has no labels", self.meta.source))
        })?;
        let idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| include.contains(l))
            .map(|(i, _)| i)
            .collect();
        Ok(self.select(&idx))
    }

    /// Rows whose label is not in `exclude`, in original order.
    pub fn exclude_labels(&self, exclude: &[u32]) -> Result<Dataset> {
        let labels = self.labels.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("dataset {} has no labels", self.meta.source))
        })?;
        let keep: Vec<u32> = {
            let mut all: Vec<u32> = labels.clone();
            all.sort_unstable();
            all.dedup();
            all.into_iter().filter(|l| !exclude.contains(l)).collect()
        };
        self.filter_labels(&keep)
    }

    /// Applies a stored normalization. Re-applying the record a dataset already
    /// carries is a no-op; applying a different one is an error.
    pub fn normalized_with(&self, record: &NormalizationRecord) -> Result<Dataset> {
        match &self.meta.normalization {
            Some(r) if r == record => return Ok(self.clone()),
            Some(r) => {
                return Err(Error::InvalidArgument(format!(
                    "dataset already normalized with mean {} std {}",
                    r.mean, r.std
                )))
            }
            None => {}
        }
        let mut out = self.clone();
        out.samples.map_in_place(|x| record.apply(x));
        out.meta.normalization = Some(*record);
        Ok(out)
    }
}

/// Global pixel mean and population standard deviation of `train`.
pub fn normalization_record(train: &Dataset) -> Result<NormalizationRecord> {
    if train.samples.is_empty() {
        return Err(Error::InsufficientData("cannot normalize an empty dataset".into()));
    }
    let xs = train.samples.as_slice();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::InvalidArgument(
            "training data is constant; standard deviation is zero".into(),
        ));
    }
    Ok(NormalizationRecord { mean, std })
}

/// Computes the record from `train` alone and applies it to `train` and every
/// dataset in `others`.
pub fn normalize(
    train: &Dataset,
    others: &[&Dataset],
) -> Result<(Dataset, Vec<Dataset>, NormalizationRecord)> {
    let record = normalization_record(train)?;
    let train = train.normalized_with(&record)?;
    let others = others
        .iter()
        .map(|d| d.normalized_with(&record))
        .collect::<Result<Vec<_>>>()?;
    Ok((train, others, record))
}

/// Random partition of row indices; each side is sorted ascending.
pub fn split_indices(n: usize, train_fraction: f64, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InsufficientData(format!(
            "splitting {n} rows at {train_fraction} leaves one side empty"
        )));
    }
    let perm = rng.permutation(n);
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Shuffled train/test split; row order within each side follows the source.
pub fn split(dataset: &Dataset, train_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset.len(), train_fraction, rng)?;
    Ok((dataset.select(&train), dataset.select(&test)))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
