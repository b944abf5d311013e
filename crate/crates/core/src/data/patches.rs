//! Random-offset patch extraction from a single grayscale image.

use crate::data::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Patches whose pixel standard deviation (on the `[0, 1]` scale) falls below
/// this are featureless.
pub const FEATURELESS_STD: f64 = 0.02;

/// Draw attempts allowed per requested patch when rejecting featureless ones.
pub const ATTEMPTS_PER_PATCH: usize = 100;

/// Copies the `size × size` window with top-left corner `(top, left)`.
pub fn patch_at(image: &Matrix, top: usize, left: usize, size: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    for r in top..top + size {
        out.extend_from_slice(&image.row(r)[left..left + size]);
    }
    out
}

fn pixel_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// `n` patches at uniformly random offsets of `image` (`height × width`).
/// With `reject_featureless`, low-contrast draws are discarded and redrawn.
pub fn extract_patches(
    image: &Matrix,
    patch: usize,
    n: usize,
    rng: &mut Rng,
    reject_featureless: bool,
) -> Result<Dataset> {
    if patch == 0 || n == 0 {
        return Err(Error::InvalidArgument("patch size and count must be positive".into()));
    }
    let (h, w) = image.shape();
    if h < patch || w < patch {
        return Err(Error::InvalidArgument(format!(
            "{h}x{w} image is smaller than a {patch}x{patch} patch"
        )));
    }
    let mut data = Vec::with_capacity(n * patch * patch);
    let mut accepted = 0;
    let mut attempts = 0;
    let budget = n.saturating_mul(ATTEMPTS_PER_PATCH);
    while accepted < n {
        if attempts == budget {
            return Err(Error::InsufficientData(format!(
                "only {accepted} of {n} patches had features after {attempts} draws"
            )));
        }
        attempts += 1;
        let top = rng.below(h - patch + 1);
        let left = rng.below(w - patch + 1);
        let p = patch_at(image, top, left, patch);
        if reject_featureless && pixel_std(&p) < FEATURELESS_STD {
            continue;
        }
        data.extend(p);
        accepted += 1;
    }
    Ok(Dataset::unlabeled(
        Matrix::from_vec(n, patch * patch, data)?,
        DatasetMeta::new("patches", patch, patch),
    ))
}
