//! Synthetic road-surface imagery.
//!
//! Each frame is a gray asphalt surface under a random exposure: a base level
//! with a smooth illumination gradient and multi-octave value noise for the
//! aggregate. On top of that come optional roadside vegetation past a slanted
//! road edge, darker tire-wear bands, sealed cracks and dashed lane markings,
//! then fine per-pixel grain.

use crate::data::{extract_patches, Dataset, DatasetMeta};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Side length of generated frames.
pub const FRAME_SIZE: usize = 128;

/// Patches drawn from each frame.
pub const PATCHES_PER_FRAME: usize = 50;

/// Smoothly interpolated lattice noise with cells of `cell` pixels.
fn value_noise(h: usize, w: usize, cell: usize, rng: &mut Rng) -> Vec<f64> {
    let gh = h / cell + 2;
    let gw = w / cell + 2;
    let lattice: Vec<f64> = (0..gh * gw).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let fade = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let gy = y / cell;
        let ty = fade((y % cell) as f64 / cell as f64);
        for x in 0..w {
            let gx = x / cell;
            let tx = fade((x % cell) as f64 / cell as f64);
            let at = |r: usize, c: usize| lattice[r * gw + c];
            let top = at(gy, gx) * (1.0 - tx) + at(gy, gx + 1) * tx;
            let bottom = at(gy + 1, gx) * (1.0 - tx) + at(gy + 1, gx + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// One `height × width` frame with values in `[0, 1]`.
pub fn road_frame(height: usize, width: usize, rng: &mut Rng) -> Matrix {
    // Exposure: overall brightness and a contrast gain applied to all detail.
    let base = rng.uniform_range(0.2, 0.7);
    let gain = rng.uniform_range(0.6, 2.5);
    let gx = rng.uniform_range(-0.15, 0.15) / width as f64;
    let gy = rng.uniform_range(-0.15, 0.15) / height as f64;
    let mut img: Vec<f64> = (0..height * width)
        .map(|i| base + gx * (i % width) as f64 + gy * (i / width) as f64)
        .collect();

    for (cell, amp) in [(16, 0.05), (8, 0.035), (4, 0.025), (2, 0.02)] {
        let noise = value_noise(height, width, cell, rng);
        img.iter_mut().zip(noise).for_each(|(p, n)| *p += gain * amp * n);
    }

    // Roadside vegetation beyond a slanted road edge.
    if rng.uniform() < 0.5 {
        let x0 = rng.uniform_range(0.0, width as f64);
        let slope = rng.uniform_range(-0.5, 0.5);
        let left = rng.uniform() < 0.5;
        let shift = rng.uniform_range(-0.2, 0.1);
        let fine = value_noise(height, width, 2, rng);
        let coarse = value_noise(height, width, 6, rng);
        for (i, p) in img.iter_mut().enumerate() {
            let edge = x0 + slope * (i / width) as f64;
            let x = (i % width) as f64;
            if (x < edge) == left {
                *p += shift + gain * (0.1 * fine[i] + 0.08 * coarse[i] + 0.05 * rng.normal());
            }
        }
    }

    // Tire-wear bands: soft-edged darker vertical strips.
    for _ in 0..rng.below(3) {
        let center = rng.uniform_range(0.0, width as f64);
        let half = rng.uniform_range(5.0, 10.0);
        let depth = rng.uniform_range(0.02, 0.06);
        for (i, p) in img.iter_mut().enumerate() {
            let d = ((i % width) as f64 - center).abs() / half;
            if d < 1.0 {
                *p -= gain * depth * (1.0 - d * d);
            }
        }
    }

    // Sealed cracks: thin dark random walks.
    for _ in 0..rng.below(4) {
        let mut y = rng.uniform_range(0.0, height as f64);
        let mut x = rng.uniform_range(0.0, width as f64);
        let mut heading = rng.uniform_range(0.0, std::f64::consts::TAU);
        let depth = rng.uniform_range(0.05, 0.15);
        for _ in 0..rng.below(120) + 20 {
            let (r, c) = (y as usize, x as usize);
            if r < height && c < width {
                img[r * width + c] -= gain * depth;
            }
            heading += rng.uniform_range(-0.4, 0.4);
            y += heading.sin();
            x += heading.cos();
        }
    }

    // Dashed lane markings, slightly slanted.
    if rng.uniform() < 0.6 {
        for _ in 0..1 + rng.below(2) {
            let x0 = rng.uniform_range(0.0, width as f64);
            let slope = rng.uniform_range(-0.25, 0.25);
            let half_width = rng.uniform_range(1.5, 4.0);
            let period = rng.uniform_range(30.0, 50.0);
            let phase = rng.uniform_range(0.0, period);
            let brightness = rng.uniform_range(0.25, 0.5);
            for y in 0..height {
                if ((y as f64 + phase) % period) / period > 0.6 {
                    continue;
                }
                let cx = x0 + slope * y as f64;
                for x in 0..width {
                    let d = (x as f64 - cx).abs();
                    if d < half_width + 0.5 {
                        let cover = (half_width + 0.5 - d).min(1.0);
                        img[y * width + x] += brightness * cover;
                    }
                }
            }
        }
    }

    for p in &mut img {
        *p = (*p + gain * 0.015 * rng.normal()).clamp(0.0, 1.0);
    }
    Matrix::from_vec(height, width, img).expect("sized")
}

/// `n` road patches of `patch × patch` pixels, featureless ones rejected.
pub fn road_patches(n: usize, patch: usize, rng: &mut Rng) -> Result<Dataset> {
    let frame_size = FRAME_SIZE.max(patch);
    let mut parts = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(PATCHES_PER_FRAME);
        let frame = road_frame(frame_size, frame_size, rng);
        parts.push(extract_patches(&frame, patch, take, rng, true)?.samples);
        remaining -= take;
    }
    let refs: Vec<&Matrix> = parts.iter().collect();
    Ok(Dataset::unlabeled(
        Matrix::vstack(&refs)?,
        DatasetMeta::new("road-texture", patch, patch),
    ))
}
