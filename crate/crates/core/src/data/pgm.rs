//! Binary PGM (`P5`) grayscale images.

use std::path::Path;

use crate::data::read_file;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Parses a P5 image into a `height × width` matrix scaled to `[0, 1]`.
pub fn parse_pgm(bytes: &[u8]) -> Result<Matrix> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<String> {
        loop {
            match bytes.get(*pos) {
                Some(b'#') => {
                    while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                        *pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => *pos += 1,
                Some(_) => break,
                None => return Err(Error::parse(*pos as u64, "truncated PGM header")),
            }
        }
        let start = *pos;
        while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            *pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    if magic != "P5" {
        return Err(Error::parse(0, format!("expected P5 magic, found {magic:?}")));
    }
    let number = |pos: &mut usize, what: &str| -> Result<usize> {
        let at = *pos as u64;
        let t = token(pos)?;
        t.parse()
            .map_err(|_| Error::parse(at, format!("bad PGM {what}: {t:?}")))
    };
    let width = number(&mut pos, "width")?;
    let height = number(&mut pos, "height")?;
    let maxval = number(&mut pos, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(pos as u64, format!("PGM maxval {maxval} out of range")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let depth = if maxval < 256 { 1 } else { 2 };
    let need = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(depth))
        .ok_or_else(|| Error::parse(pos as u64, "PGM dimensions overflow"))?;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::parse(bytes.len() as u64, "truncated PGM raster"))?;
    let scale = maxval as f64;
    let data = if depth == 1 {
        raster.iter().map(|&b| b as f64 / scale).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    Matrix::from_vec(height, width, data)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_pgm(&read_file(path.as_ref())?)
}

/// Encodes a `[0, 1]` image as an 8-bit P5 file.
pub fn encode_pgm(image: &Matrix) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(
        image
            .as_slice()
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}
