//! Turns a run spec into training and evaluation matrices.

use neglearn::data::{self, Dataset, NormalizationRecord};
use neglearn::trainer::EvalSets;
use neglearn::{Matrix, Rng};

use crate::error::{CliError, Result};
use crate::source::SourceSpec;
use crate::spec::{LoadedSpec, ModelKind};

/// Seed offset for the train/test split stream, so that it differs from the
/// streams used for sampling and initialization under the same run seed.
const SPLIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug)]
pub struct Prepared {
    pub normal_train: Matrix,
    pub anomaly_train: Matrix,
    pub eval: Option<EvalSets>,
    pub normalization: Option<NormalizationRecord>,
}

pub fn prepare(loaded: &LoadedSpec) -> Result<Prepared> {
    let spec = &loaded.spec;
    let root = loaded.data_root();
    let load = |s: &str| SourceSpec::parse(s)?.load(&root, spec.seed);

    let normal = load(&spec.data.normal)?;
    let anomaly = spec.data.anomaly.as_deref().map(load).transpose()?;

    let (normal_train, anomaly_train, eval) =
        match (&spec.data.eval_normal, &spec.data.eval_anomaly) {
            (Some(en), Some(ea)) => (normal, anomaly, Some((load(en)?, load(ea)?))),
            _ => {
                let mut rng = Rng::new(spec.seed ^ SPLIT_STREAM);
                let (n_train, n_test) = data::split(&normal, spec.data.train_fraction, &mut rng)?;
                match anomaly {
                    Some(a) => {
                        let (a_train, a_test) = data::split(&a, spec.data.train_fraction, &mut rng)?;
                        (n_train, Some(a_train), Some((n_test, a_test)))
                    }
                    None => (n_train, None, None),
                }
            }
        };

    let width = spec.model.visible;
    let sets = [Some(&normal_train), anomaly_train.as_ref()]
        .into_iter()
        .chain(eval.iter().flat_map(|(n, a)| [Some(n), Some(a)]))
        .flatten();
    for d in sets {
        if d.width() != width {
            return Err(CliError::DataSpec(format!(
                "{} has {} features per sample but model.visible is {width}",
                d.meta.source,
                d.width()
            )));
        }
    }

    let (normal_train, anomaly_train, eval, normalization) = if spec.data.normalize {
        if spec.model.kind == ModelKind::Rbm {
            return Err(CliError::config(
                "RBM inputs must stay in [0, 1]; data.normalize is for dense models",
            ));
        }
        let mut others: Vec<&Dataset> = Vec::new();
        others.extend(anomaly_train.as_ref());
        if let Some((n, a)) = &eval {
            others.push(n);
            others.push(a);
        }
        let (train, mut rest, record) = data::normalize(&normal_train, &others)?;
        let eval = if eval.is_some() {
            let a = rest.pop().expect("two eval sets");
            let n = rest.pop().expect("two eval sets");
            Some((n, a))
        } else {
            None
        };
        let anomaly_train = rest.pop();
        (train, anomaly_train, eval, Some(record))
    } else {
        (normal_train, anomaly_train, eval, None)
    };

    Ok(Prepared {
        normal_train: normal_train.samples,
        anomaly_train: anomaly_train
            .map(|d| d.samples)
            .unwrap_or_else(|| Matrix::zeros(0, width)),
        eval: eval.map(|(n, a)| EvalSets {
            normal: n.samples,
            anomaly: a.samples,
        }),
        normalization,
    })
}
