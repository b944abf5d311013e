//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! 1024 red, 1024 green and 1024 blue bytes (row-major 32×32 planes).

use std::path::Path;

use crate::data::{read_file, Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const RECORD_BYTES: usize = 3073;
const PLANE: usize = 1024;

/// Parses a batch and converts every image to BT.601 luma in `[0, 1]`.
pub fn parse_cifar10(bytes: &[u8]) -> Result<(Matrix, Vec<u32>)> {
    let rem = bytes.len() % RECORD_BYTES;
    if rem != 0 {
        return Err(Error::parse(
            (bytes.len() - rem) as u64,
            format!(
                "CIFAR-10 batch size {} is not a multiple of {RECORD_BYTES}",
                bytes.len()
            ),
        ));
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut data = Vec::with_capacity(n * PLANE);
    let mut labels = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(RECORD_BYTES) {
        labels.push(rec[0] as u32);
        let (r, rest) = rec[1..].split_at(PLANE);
        let (g, b) = rest.split_at(PLANE);
        for i in 0..PLANE {
            let luma = 0.299 * r[i] as f64 + 0.587 * g[i] as f64 + 0.114 * b[i] as f64;
            data.push(luma / 255.0);
        }
    }
    Ok((Matrix::from_vec(n, PLANE, data)?, labels))
}

pub fn load_cifar10(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (samples, labels) = parse_cifar10(&read_file(path)?)?;
    Ok(Dataset {
        samples,
        labels: Some(labels),
        meta: DatasetMeta::new(path.display().to_string(), 32, 32),
    })
}
