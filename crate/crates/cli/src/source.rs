//! Data source strings.
//!
//! `scheme[:path][?key=value&key=value...]`, with paths relative to the data
//! root unless absolute.
//!
//! | scheme    | path                  | keys                                   |
//! |-----------|-----------------------|----------------------------------------|
//! | `idx`     | IDX image file        | `labels=PATH`                          |
//! | `cifar`   | CIFAR-10 binary batch |                                        |
//! | `pgm`     | P5 image              | `patch=N`, `n=N` (patches, else whole) |
//! | `texture` | none                  | `n=N`, `size=N` (default 32)           |
//! | `cache`   | dataset container     |                                        |
//!
//! Every scheme also accepts, applied in this order: `include=a,b` and
//! `exclude=a,b` label filters, `sample=N` for a random subset that keeps
//! source order, and `take=N` for a prefix. `seed=N` fixes the stream used
//! for sampling and generation; by default the run seed is used.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use neglearn::data::{self, texture, Dataset, DatasetMeta};
use neglearn::{format, Rng};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scheme {
    Idx,
    Cifar,
    Pgm,
    Texture,
    Cache,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    pub scheme: Scheme,
    pub path: Option<String>,
    params: BTreeMap<String, String>,
}

const COMMON_KEYS: &[&str] = &["include", "exclude", "sample", "take", "seed"];

impl SourceSpec {
    pub fn parse(text: &str) -> Result<SourceSpec> {
        let bad = |m: String| CliError::config(format!("data source {text:?}: {m}"));
        let (head, query) = match text.split_once('?') {
            Some((h, q)) => (h, Some(q)),
            None => (text, None),
        };
        let (scheme, path) = match head.split_once(':') {
            Some((s, p)) => (s, Some(p.to_owned())),
            None => (head, None),
        };
        let scheme = match scheme {
            "idx" => Scheme::Idx,
            "cifar" => Scheme::Cifar,
            "pgm" => Scheme::Pgm,
            "texture" => Scheme::Texture,
            "cache" => Scheme::Cache,
            other => return Err(bad(format!("unknown scheme {other:?}"))),
        };
        match (&scheme, &path) {
            (Scheme::Texture, Some(_)) => return Err(bad("texture takes no path".into())),
            (Scheme::Texture, None) => {}
            (_, None) => return Err(bad("missing path".into())),
            (_, Some(p)) if p.is_empty() => return Err(bad("missing path".into())),
            _ => {}
        }
        let allowed: &[&str] = match scheme {
            Scheme::Idx => &["labels"],
            Scheme::Pgm => &["patch", "n"],
            Scheme::Texture => &["n", "size"],
            Scheme::Cifar | Scheme::Cache => &[],
        };
        let mut params = BTreeMap::new();
        for pair in query.into_iter().flat_map(|q| q.split('&')).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, found {pair:?}")))?;
            if !allowed.contains(&k) && !COMMON_KEYS.contains(&k) {
                return Err(bad(format!("unknown key {k:?}")));
            }
            if params.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(bad(format!("duplicate key {k:?}")));
            }
        }
        let spec = SourceSpec {
            scheme,
            path,
            params,
        };
        for key in ["sample", "take", "seed", "n", "size", "patch"] {
            spec.number(key).map_err(|e| bad(e.to_string()))?;
        }
        spec.labels("include").map_err(|e| bad(e.to_string()))?;
        spec.labels("exclude").map_err(|e| bad(e.to_string()))?;
        if spec.scheme == Scheme::Texture && !spec.params.contains_key("n") {
            return Err(bad("texture needs n".into()));
        }
        if spec.scheme == Scheme::Pgm && spec.params.contains_key("patch") != spec.params.contains_key("n") {
            return Err(bad("pgm patch and n go together".into()));
        }
        Ok(spec)
    }

    fn number(&self, key: &str) -> Result<Option<u64>> {
        self.params
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::config(format!("{key} must be a non-negative integer, found {v:?}")))
            })
            .transpose()
    }

    fn labels(&self, key: &str) -> Result<Option<Vec<u32>>> {
        self.params
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| CliError::config(format!("bad label {s:?} in {key}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn resolve(&self, root: &Path, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_owned()
        } else {
            root.join(p)
        }
    }

    /// Reads and post-processes the source.
    pub fn load(&self, root: &Path, default_seed: u64) -> Result<Dataset> {
        let seed = self.number("seed")?.unwrap_or(default_seed);
        let mut rng = Rng::new(seed);
        let path = self.path.as_deref().map(|p| self.resolve(root, p));
        let mut d = match self.scheme {
            Scheme::Idx => {
                let labels = self.params.get("labels").map(|l| self.resolve(root, l));
                data::load_idx(path.as_ref().expect("checked"), labels.as_deref())?
            }
            Scheme::Cifar => data::load_cifar10(path.as_ref().expect("checked"))?,
            Scheme::Cache => format::load_dataset(path.as_ref().expect("checked"))?,
            Scheme::Texture => {
                let n = self.number("n")?.expect("checked") as usize;
                let size = self.number("size")?.unwrap_or(32) as usize;
                texture::road_patches(n, size, &mut rng)?
            }
            Scheme::Pgm => {
                let path = path.as_ref().expect("checked");
                let image = data::load_pgm(path)?;
                match (self.number("patch")?, self.number("n")?) {
                    (Some(patch), Some(n)) => {
                        data::extract_patches(&image, patch as usize, n as usize, &mut rng, true)?
                    }
                    _ => {
                        let (h, w) = image.shape();
                        let row = neglearn::Matrix::from_vec(1, h * w, image.into_vec())?;
                        Dataset::unlabeled(row, DatasetMeta::new(path.display().to_string(), h, w))
                    }
                }
            }
        };
        if let Some(include) = self.labels("include")? {
            d = d.filter_labels(&include)?;
        }
        if let Some(exclude) = self.labels("exclude")? {
            d = d.exclude_labels(&exclude)?;
        }
        if let Some(n) = self.number("sample")? {
            let n = n as usize;
            if n > d.len() {
                return Err(CliError::DataSpec(format!(
                    "cannot sample {n} rows from {} available",
                    d.len()
                )));
            }
            let mut idx = rng.permutation(d.len());
            idx.truncate(n);
            idx.sort_unstable();
            d = d.select(&idx);
        }
        if let Some(n) = self.number("take")? {
            d = d.take(n as usize);
        }
        if d.is_empty() {
            return Err(CliError::DataSpec("source selects no rows".into()));
        }
        Ok(d)
    }
}
