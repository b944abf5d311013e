//! IDX files (the MNIST container): big-endian header, unsigned-byte payload.

use std::path::Path;

use crate::data::{read_file, Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const IMAGES_MAGIC: u32 = 0x0000_0803;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(bytes.len() as u64, "truncated IDX header"))
}

/// Validates the header and returns `(dims, payload)`.
fn parse(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, &[u8])> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::parse(
            0,
            format!("bad IDX magic {found:#010x}, expected {magic:#010x}"),
        ));
    }
    let ndims = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(be_u32(bytes, 4 + 4 * d)? as usize);
    }
    let header = 4 + 4 * ndims;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::parse(4, format!("IDX dimensions {dims:?} overflow")))?;
    let end = header
        .checked_add(count)
        .ok_or_else(|| Error::parse(4, format!("IDX dimensions {dims:?} overflow")))?;
    if bytes.len() < end {
        return Err(Error::parse(
            bytes.len() as u64,
            format!("truncated IDX payload: header promises {count} bytes after offset {header}"),
        ));
    }
    if bytes.len() > end {
        return Err(Error::parse(end as u64, "trailing bytes after IDX payload"));
    }
    Ok((dims, &bytes[header..]))
}

/// Parses an image file; pixels are scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8]) -> Result<(Matrix, usize, usize)> {
    let (dims, payload) = parse(bytes, IMAGES_MAGIC)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    let data = payload.iter().map(|&b| b as f64 / 255.0).collect();
    Ok((Matrix::from_vec(n, rows * cols, data)?, rows, cols))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u32>> {
    let (_, payload) = parse(bytes, LABELS_MAGIC)?;
    Ok(payload.iter().map(|&b| b as u32).collect())
}

/// Loads an IDX image file and, optionally, its label file.
pub fn load_idx(images: impl AsRef<Path>, labels: Option<&Path>) -> Result<Dataset> {
    let images = images.as_ref();
    let (samples, rows, cols) = parse_images(&read_file(images)?)?;
    let labels = match labels {
        Some(path) => {
            let l = parse_labels(&read_file(path)?)?;
            if l.len() != samples.rows() {
                return Err(Error::InvalidArgument(format!(
                    "{} labels for {} images",
                    l.len(),
                    samples.rows()
                )));
            }
            Some(l)
        }
        None => None,
    };
    Ok(Dataset {
        samples,
        labels,
        meta: DatasetMeta::new(images.display().to_string(), rows, cols),
    })
}

/// Encodes `[0, 1]` images as an IDX image file (values rounded to bytes).
pub fn encode_images(samples: &Matrix, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != samples.cols() {
        return Err(Error::InvalidArgument(format!(
            "{rows}x{cols} images do not match width {}",
            samples.cols()
        )));
    }
    let mut out = Vec::with_capacity(16 + samples.len());
    for v in [IMAGES_MAGIC, samples.rows() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(
        samples
            .as_slice()
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

pub fn encode_labels(labels: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        out.push(u8::try_from(l).map_err(|_| {
            Error::InvalidArgument(format!("label {l} does not fit an IDX byte"))
        })?);
    }
    Ok(out)
}
