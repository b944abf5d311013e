//! `train`, `eval` and `sweep`.

use std::path::{Path, PathBuf};

use neglearn::dense::DenseAutoencoder;
use neglearn::eval::{self, Histogram, Label, RocCurve, ScoreSet};
use neglearn::format::{AnyModel, ModelFile};
use neglearn::rbm::RbmModel;
use neglearn::trainer::{train_with_hook, TrainLog, TrainingConfig};
use neglearn::{Matrix, Rng, Trainable};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::pipeline::{self, Prepared};
use crate::source::SourceSpec;
use crate::spec::{LoadedSpec, ModelKind};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "NEGLEARN_OUT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

pub const MODEL_FILE: &str = "model.nlrn";
pub const TRAIN_LOG_CSV: &str = "train_log.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const ROC_CSV: &str = "roc.csv";
pub const HISTOGRAM_CSV: &str = "histogram.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub q_negative: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub run: String,
    pub seed: u64,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_negative: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub mean_normal_dissimilarity: f64,
    pub mean_anomaly_dissimilarity: f64,
    pub auroc: f64,
    pub histogram_overlap: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub log: TrainLog,
    pub summary: Option<Summary>,
}

/// `# seed=… config=…`, the first line of every CSV written.
pub fn provenance(seed: u64, hash: &str) -> String {
    format!("# neglearn seed={seed} config={hash}\n")
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_owned(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Output {
        path: path.to_owned(),
        source,
    })
}

fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    write(path, file.to_bytes())
}

/// Explicit `--out`, then `[output] dir`, then `$NEGLEARN_OUT/<run>`, then
/// `runs/<run>`.
pub fn output_dir(loaded: &LoadedSpec, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_owned();
    }
    if let Some(p) = &loaded.spec.output.dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
    root.join(loaded.run_name())
}

pub fn apply_overrides(loaded: &LoadedSpec, ov: &Overrides) -> Result<LoadedSpec> {
    let mut out = loaded.clone();
    if let Some(s) = ov.seed {
        out.spec.seed = s;
    }
    if let Some(e) = ov.epochs {
        out.spec.training.epochs = e;
    }
    if let Some(q) = ov.q_negative {
        out.spec.training.q_negative = q;
    }
    out.spec.validate()?;
    Ok(out)
}

pub fn train(loaded: &LoadedSpec, ov: &Overrides) -> Result<TrainOutcome> {
    let loaded = apply_overrides(loaded, ov)?;
    let out_dir = output_dir(&loaded, ov.out.as_deref());
    let data = pipeline::prepare(&loaded)?;
    create_dir(&out_dir)?;
    let spec = &loaded.spec;
    let mut rng = Rng::new(spec.seed);
    match spec.model.kind {
        ModelKind::Rbm => {
            let model = RbmModel::new(spec.model.visible, spec.model.hidden, &mut rng);
            fit(&loaded, &out_dir, model, spec.training_config_rbm(), &data, AnyModel::Rbm)
        }
        ModelKind::Dense => {
            let model = DenseAutoencoder::new(
                spec.model.visible,
                spec.model.hidden,
                spec.output_activation(),
                &mut rng,
            );
            fit(&loaded, &out_dir, model, spec.training_config_dense(), &data, AnyModel::Dense)
        }
    }
}

fn fit<M: Trainable>(
    loaded: &LoadedSpec,
    out_dir: &Path,
    model: M,
    cfg: TrainingConfig<M::Settings>,
    data: &Prepared,
    wrap: fn(M) -> AnyModel,
) -> Result<TrainOutcome> {
    let spec = &loaded.spec;
    let hash = spec.hash();
    let header = provenance(spec.seed, &hash);
    let model_file = |m: &M| ModelFile {
        model: wrap(m.clone()),
        normalization: data.normalization,
    };
    let every = spec.training.checkpoint_every;
    let result = train_with_hook(
        model,
        &data.normal_train,
        &data.anomaly_train,
        &cfg,
        data.eval.as_ref(),
        |m, rec| {
            if every > 0 && rec.epoch % every == 0 {
                let path = out_dir.join(format!("checkpoint-epoch-{:04}.nlrn", rec.epoch));
                save_model(&path, &model_file(m)).map_err(|e| neglearn::Error::Io {
                    path,
                    source: std::io::Error::other(e.to_string()),
                })?;
            }
            Ok(())
        },
    );
    let (model, log) = match result {
        Ok(ok) => ok,
        Err(e) => {
            let saved = out_dir.join(MODEL_FILE);
            save_model(&saved, &model_file(&e.last_good))?;
            write(&out_dir.join(TRAIN_LOG_CSV), format!("{header}{}", e.log.to_csv()))?;
            if e.is_divergence() {
                return Err(CliError::Diverged {
                    epoch: e.epoch,
                    saved,
                    source: e.source,
                });
            }
            return Err(e.source.into());
        }
    };
    save_model(&out_dir.join(MODEL_FILE), &model_file(&model))?;
    write(&out_dir.join(TRAIN_LOG_CSV), format!("{header}{}", log.to_csv()))?;

    let summary = match &data.eval {
        Some(sets) => {
            let scores = eval::score_labeled(&model, &sets.normal, &sets.anomaly)?;
            let mut s = write_evaluation(
                out_dir,
                &scores,
                &header,
                spec.output.histogram_bins.unwrap_or(eval::DEFAULT_BINS),
            )?;
            s.run = loaded.run_name();
            s.seed = spec.seed;
            s.config_hash = hash;
            s.q_negative = Some(spec.training.q_negative);
            s.epochs = Some(spec.training.epochs);
            write(&out_dir.join(SUMMARY_JSON), summary_json(&s))?;
            Some(s)
        }
        None => None,
    };
    Ok(TrainOutcome {
        out_dir: out_dir.to_owned(),
        log,
        summary,
    })
}

fn summary_json(s: &Summary) -> String {
    let mut text = serde_json::to_string_pretty(s).expect("summary serializes");
    text.push('\n');
    text
}

/// Writes scores, ROC and histogram CSVs; the returned summary has its run
/// identification fields left blank.
fn write_evaluation(out_dir: &Path, scores: &ScoreSet, header: &str, bins: usize) -> Result<Summary> {
    let curve: RocCurve = eval::roc(scores)?;
    let hist: Histogram = eval::histogram(scores, bins)?;
    write(&out_dir.join(SCORES_CSV), format!("{header}{}", scores.to_csv()))?;
    write(&out_dir.join(ROC_CSV), format!("{header}{}", curve.to_csv()))?;
    write(&out_dir.join(HISTOGRAM_CSV), format!("{header}{}", hist.to_csv()))?;
    Ok(Summary {
        run: String::new(),
        seed: 0,
        config_hash: String::new(),
        q_negative: None,
        epochs: None,
        n_normal: scores.count(Label::Normal),
        n_anomaly: scores.count(Label::Anomaly),
        mean_normal_dissimilarity: scores.mean(Label::Normal).unwrap_or(f64::NAN),
        mean_anomaly_dissimilarity: scores.mean(Label::Anomaly).unwrap_or(f64::NAN),
        auroc: curve.auroc,
        histogram_overlap: hist.overlap(),
    })
}

/// Scores a saved model on two data sources. Relative paths in the sources
/// resolve against the working directory.
pub fn evaluate(
    model_path: &Path,
    normal_source: &str,
    anomaly_source: &str,
    out_dir: &Path,
    seed: u64,
) -> Result<Summary> {
    let bytes = std::fs::read(model_path).map_err(|e| CliError::Data(neglearn::Error::Io {
        path: model_path.to_owned(),
        source: e,
    }))?;
    let file = ModelFile::from_bytes(&bytes).map_err(CliError::Data)?;
    let root = Path::new(".");
    let load = |s: &str| -> Result<Matrix> {
        let mut d = SourceSpec::parse(s)?.load(root, seed)?;
        if let Some(rec) = &file.normalization {
            d = d.normalized_with(rec)?;
        }
        Ok(d.samples)
    };
    let normal = load(normal_source)?;
    let anomaly = load(anomaly_source)?;
    let width = neglearn::Reconstructor::input_width(&file.model);
    if normal.cols() != width || anomaly.cols() != width {
        return Err(CliError::DataSpec(format!(
            "model expects {width} features; sources have {} and {}",
            normal.cols(),
            anomaly.cols()
        )));
    }

    // Identifies the evaluation by model contents and both source strings.
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update(normal_source.as_bytes());
    hasher.update([0]);
    hasher.update(anomaly_source.as_bytes());
    let digest = hasher.finalize();
    let hash: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();

    create_dir(out_dir)?;
    let header = provenance(seed, &hash);
    let scores = eval::score_labeled(&file.model, &normal, &anomaly)?;
    let mut s = write_evaluation(out_dir, &scores, &header, eval::DEFAULT_BINS)?;
    s.run = model_path.display().to_string();
    s.seed = seed;
    s.config_hash = hash;
    write(&out_dir.join(SUMMARY_JSON), summary_json(&s))?;
    Ok(s)
}

/// Parses `0,1,5,10`, rejecting empty lists and repeats.
pub fn parse_q_list(text: &str) -> Result<Vec<usize>> {
    let mut qs = Vec::new();
    for part in text.split(',') {
        let q: usize = part
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("bad Q value {part:?}")))?;
        if qs.contains(&q) {
            return Err(CliError::config(format!("Q value {q} listed twice")));
        }
        qs.push(q);
    }
    Ok(qs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub q_negative: usize,
    pub auroc: Option<f64>,
    pub diverged: bool,
}

/// Trains once per Q into `<out>/q<Q>` and writes a `sweep.csv` table.
/// A diverged run is recorded and the sweep continues.
pub fn sweep(loaded: &LoadedSpec, qs: &[usize], ov: &Overrides) -> Result<Vec<SweepRow>> {
    let base = apply_overrides(loaded, ov)?;
    let out_dir = output_dir(&base, ov.out.as_deref());
    let mut rows = Vec::new();
    for &q in qs {
        let run_ov = Overrides {
            q_negative: Some(q),
            out: Some(out_dir.join(format!("q{q}"))),
            ..Overrides::default()
        };
        let row = match train(&base, &run_ov) {
            Ok(outcome) => SweepRow {
                q_negative: q,
                auroc: outcome.summary.map(|s| s.auroc),
                diverged: false,
            },
            Err(CliError::Diverged { .. }) => SweepRow {
                q_negative: q,
                auroc: None,
                diverged: true,
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let mut csv = provenance(base.spec.seed, &base.spec.hash());
    csv.push_str("q_negative,auroc,diverged\n");
    for r in &rows {
        let auroc = r.auroc.map(|a| a.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{auroc},{}\n", r.q_negative, r.diverged));
    }
    write(&out_dir.join(SWEEP_CSV), csv)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_lists() {
        assert_eq!(parse_q_list("0,1,5,10").unwrap(), vec![0, 1, 5, 10]);
        assert_eq!(parse_q_list(" 3 ").unwrap(), vec![3]);
        for bad in ["0,1,0", "", "1,,2", "-1", "a"] {
            let e = parse_q_list(bad).unwrap_err();
            assert_eq!(e.exit_code(), crate::error::exit::CONFIG, "{bad}");
        }
    }

    #[test]
    fn provenance_line() {
        assert_eq!(provenance(3, "ab"), "# neglearn seed=3 config=ab\n");
    }
}
