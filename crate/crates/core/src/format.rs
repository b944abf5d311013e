//! Binary container for trained models and cached datasets.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic b"NLRN"
//! 4       2     version (1)
//! 6       2     kind: 1 = RBM, 2 = dense autoencoder, 3 = dataset
//! 8       ...   kind-specific body
//! ```
//!
//! Every body embeds a 17-byte normalization block: `u8` present flag, then
//! `f64` mean and `f64` std (zero when absent).
//!
//! * RBM: `u64 n_visible, u64 n_hidden`, normalization, then `f64` weights
//!   (`n_visible × n_hidden`, row-major), visible bias, hidden bias.
//! * Dense: `u64 n_input, u64 n_hidden, u8 output` (0 = sigmoid,
//!   1 = identity), normalization, then `f64` encoder weights (`n_input ×
//!   n_hidden`), encoder bias, decoder weights (`n_hidden × n_input`), decoder
//!   bias.
//! * Dataset: `u64 rows, u64 cols, u64 image_height, u64 image_width,
//!   u8 has_labels`, normalization, `u32` source length and UTF-8 source
//!   name, `f64` samples (row-major), then `u32` labels if present.
//!
//! The payload must end exactly at end of file.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta, NormalizationRecord};
use crate::dense::{DenseAutoencoder, OutputActivation};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rbm::RbmModel;
use crate::Reconstructor;

pub const MAGIC: [u8; 4] = *b"NLRN";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u16)]
pub enum Kind {
    Rbm = 1,
    Dense = 2,
    Dataset = 3,
}

/// Either trainable model family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnyModel {
    Rbm(RbmModel),
    Dense(DenseAutoencoder),
}

impl AnyModel {
    pub fn kind(&self) -> Kind {
        match self {
            AnyModel::Rbm(_) => Kind::Rbm,
            AnyModel::Dense(_) => Kind::Dense,
        }
    }
}

impl Reconstructor for AnyModel {
    fn input_width(&self) -> usize {
        match self {
            AnyModel::Rbm(m) => m.input_width(),
            AnyModel::Dense(m) => m.input_width(),
        }
    }

    fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            AnyModel::Rbm(m) => m.reconstruct(x),
            AnyModel::Dense(m) => m.reconstruct(x),
        }
    }

    fn max_abs_param(&self) -> f64 {
        match self {
            AnyModel::Rbm(m) => m.max_abs_param(),
            AnyModel::Dense(m) => m.max_abs_param(),
        }
    }
}

/// A model plus the input normalization it was trained under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: AnyModel,
    pub normalization: Option<NormalizationRecord>,
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        write_header(&mut w, self.model.kind());
        match &self.model {
            AnyModel::Rbm(m) => {
                put_u64(&mut w, m.n_visible() as u64);
                put_u64(&mut w, m.n_hidden() as u64);
                put_norm(&mut w, self.normalization.as_ref());
                put_f64s(&mut w, m.weights().as_slice());
                put_f64s(&mut w, m.visible_bias());
                put_f64s(&mut w, m.hidden_bias());
            }
            AnyModel::Dense(m) => {
                put_u64(&mut w, m.n_input() as u64);
                put_u64(&mut w, m.n_hidden() as u64);
                w.push(match m.output_activation() {
                    OutputActivation::Sigmoid => 0,
                    OutputActivation::Identity => 1,
                });
                put_norm(&mut w, self.normalization.as_ref());
                for s in m.param_slices() {
                    put_f64s(&mut w, s);
                }
            }
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let kind = r.header()?;
        let file = match kind {
            Kind::Rbm => {
                let nv = r.dim()?;
                let nh = r.dim()?;
                let normalization = r.norm()?;
                let weights = Matrix::from_vec(nv, nh, r.f64s(nv * nh)?)?;
                let vb = r.f64s(nv)?;
                let hb = r.f64s(nh)?;
                ModelFile {
                    model: AnyModel::Rbm(RbmModel::from_parts(weights, vb, hb)?),
                    normalization,
                }
            }
            Kind::Dense => {
                let n = r.dim()?;
                let h = r.dim()?;
                let at = r.pos();
                let output = match r.u8()? {
                    0 => OutputActivation::Sigmoid,
                    1 => OutputActivation::Identity,
                    other => return Err(Error::parse(at, format!("unknown output activation {other}"))),
                };
                let normalization = r.norm()?;
                let we = Matrix::from_vec(n, h, r.f64s(n * h)?)?;
                let be = r.f64s(h)?;
                let wd = Matrix::from_vec(h, n, r.f64s(h * n)?)?;
                let bd = r.f64s(n)?;
                ModelFile {
                    model: AnyModel::Dense(DenseAutoencoder::from_parts(we, be, wd, bd, output)?),
                    normalization,
                }
            }
            Kind::Dataset => {
                return Err(Error::parse(6, "file holds a dataset, not a model"));
            }
        };
        r.finish()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&crate::data::read_file(path)?)
    }

    /// Full JSON rendering, for inspection.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn dataset_to_bytes(d: &Dataset) -> Vec<u8> {
    let mut w = Vec::new();
    write_header(&mut w, Kind::Dataset);
    put_u64(&mut w, d.samples.rows() as u64);
    put_u64(&mut w, d.samples.cols() as u64);
    put_u64(&mut w, d.meta.image_height as u64);
    put_u64(&mut w, d.meta.image_width as u64);
    w.push(d.labels.is_some() as u8);
    put_norm(&mut w, d.meta.normalization.as_ref());
    let src = d.meta.source.as_bytes();
    w.write_u32::<LE>(src.len() as u32).expect("vec write");
    w.extend_from_slice(src);
    put_f64s(&mut w, d.samples.as_slice());
    if let Some(labels) = &d.labels {
        for &l in labels {
            w.write_u32::<LE>(l).expect("vec write");
        }
    }
    w
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes);
    if r.header()? != Kind::Dataset {
        return Err(Error::parse(6, "file holds a model, not a dataset"));
    }
    let rows = r.dim()?;
    let cols = r.dim()?;
    let image_height = r.dim()?;
    let image_width = r.dim()?;
    let has_labels = r.u8()? != 0;
    let normalization = r.norm()?;
    let len = r.u32()? as usize;
    let at = r.pos();
    let source = String::from_utf8(r.bytes(len)?.to_vec())
        .map_err(|_| Error::parse(at, "source name is not UTF-8"))?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::parse(8, "dataset dimensions overflow"))?;
    let samples = Matrix::from_vec(rows, cols, r.f64s(count)?)?;
    let labels = if has_labels {
        Some((0..rows).map(|_| r.u32()).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    r.finish()?;
    Ok(Dataset {
        samples,
        labels,
        meta: DatasetMeta {
            source,
            image_height,
            image_width,
            normalization,
        },
    })
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &dataset_to_bytes(d))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    dataset_from_bytes(&crate::data::read_file(path.as_ref())?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn write_header(w: &mut Vec<u8>, kind: Kind) {
    w.extend_from_slice(&MAGIC);
    w.write_u16::<LE>(VERSION).expect("vec write");
    w.write_u16::<LE>(kind as u16).expect("vec write");
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.write_u64::<LE>(v).expect("vec write");
}

fn put_f64s(w: &mut Vec<u8>, values: &[f64]) {
    w.reserve(values.len() * 8);
    for &v in values {
        w.write_f64::<LE>(v).expect("vec write");
    }
}

fn put_norm(w: &mut Vec<u8>, norm: Option<&NormalizationRecord>) {
    w.push(norm.is_some() as u8);
    let (mean, std) = norm.map_or((0.0, 0.0), |n| (n.mean, n.std));
    w.write_f64::<LE>(mean).expect("vec write");
    w.write_f64::<LE>(std).expect("vec write");
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader {
            cur: Cursor::new(bytes),
        }
    }

    fn pos(&self) -> u64 {
        self.cur.position()
    }

    fn len(&self) -> u64 {
        self.cur.get_ref().len() as u64
    }

    fn truncated(&self, what: &str) -> Error {
        Error::parse(self.len(), format!("truncated container while reading {what}"))
    }

    fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(|_| self.truncated("u8"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.cur.read_u32::<LE>().map_err(|_| self.truncated("u32"))
    }

    fn dim(&mut self) -> Result<usize> {
        let at = self.pos();
        let v = self.cur.read_u64::<LE>().map_err(|_| self.truncated("dimension"))?;
        // A dimension can never exceed the remaining payload in f64s.
        if v > self.len() / 8 + 1 {
            return Err(Error::parse(at, format!("implausible dimension {v}")));
        }
        Ok(v as usize)
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let start = self.pos() as usize;
        let all: &'a [u8] = self.cur.get_ref();
        let end = start
            .checked_add(n)
            .filter(|&e| e <= all.len())
            .ok_or_else(|| self.truncated("bytes"))?;
        self.cur.set_position(end as u64);
        Ok(&all[start..end])
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.bytes(n.checked_mul(8).ok_or_else(|| self.truncated("f64 array"))?)?;
        let mut out = vec![0.0; n];
        let mut c = Cursor::new(raw);
        c.read_f64_into::<LE>(&mut out).map_err(|_| self.truncated("f64 array"))?;
        Ok(out)
    }

    fn norm(&mut self) -> Result<Option<NormalizationRecord>> {
        let present = self.u8()? != 0;
        let mean = self.cur.read_f64::<LE>().map_err(|_| self.truncated("normalization"))?;
        let std = self.cur.read_f64::<LE>().map_err(|_| self.truncated("normalization"))?;
        Ok(present.then_some(NormalizationRecord { mean, std }))
    }

    fn header(&mut self) -> Result<Kind> {
        let mut magic = [0u8; 4];
        self.cur
            .read_exact(&mut magic)
            .map_err(|_| self.truncated("magic"))?;
        if magic != MAGIC {
            return Err(Error::parse(0, format!("bad magic {magic:?}")));
        }
        let version = self.cur.read_u16::<LE>().map_err(|_| self.truncated("version"))?;
        if version != VERSION {
            return Err(Error::parse(4, format!("unsupported version {version}")));
        }
        match self.cur.read_u16::<LE>().map_err(|_| self.truncated("kind"))? {
            1 => Ok(Kind::Rbm),
            2 => Ok(Kind::Dense),
            3 => Ok(Kind::Dataset),
            other => Err(Error::parse(6, format!("unknown kind {other}"))),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos() != self.len() {
            return Err(Error::parse(self.pos(), "trailing bytes after payload"));
        }
        Ok(())
    }
}
