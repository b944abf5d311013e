//! Anomaly scores, ROC curves, score histograms and the LDA baseline.
//!
//! The anomaly class is always the positive class: a higher score means "more
//! anomalous", and TPR counts anomalies above the threshold.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{row_mse, spd_inverse, Matrix};
use crate::Reconstructor;

/// Rows scored per reconstruction call.
const SCORE_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomaly => "anomaly",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub sample_id: usize,
    pub dissimilarity: f64,
    pub label: Label,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub scores: Vec<ScoredSample>,
}

/// Per-row reconstruction MSE of `samples` under `model`.
pub fn dissimilarities<M: Reconstructor + ?Sized>(model: &M, samples: &Matrix) -> Result<Vec<f64>> {
    if samples.cols() != model.input_width() {
        return Err(Error::Shape {
            op: "score",
            left: samples.shape(),
            right: (samples.rows(), model.input_width()),
        });
    }
    let mut out = Vec::with_capacity(samples.rows());
    let mut start = 0;
    while start < samples.rows() {
        let end = (start + SCORE_CHUNK).min(samples.rows());
        let chunk = samples.slice_rows(start, end);
        out.extend(row_mse(&model.reconstruct(&chunk)?, &chunk)?);
        start = end;
    }
    Ok(out)
}

/// Scores every row of `samples` with the same label; ids are row indices.
pub fn score<M: Reconstructor + ?Sized>(model: &M, samples: &Matrix, label: Label) -> Result<ScoreSet> {
    let d = dissimilarities(model, samples)?;
    Ok(ScoreSet::from_scores(&d, label))
}

/// Scores a normal set followed by an anomaly set. Ids run consecutively
/// across both.
pub fn score_labeled<M: Reconstructor + ?Sized>(
    model: &M,
    normal: &Matrix,
    anomaly: &Matrix,
) -> Result<ScoreSet> {
    let mut set = score(model, normal, Label::Normal)?;
    set.extend(ScoreSet::from_scores(&dissimilarities(model, anomaly)?, Label::Anomaly));
    Ok(set)
}

impl ScoreSet {
    pub fn from_scores(scores: &[f64], label: Label) -> Self {
        ScoreSet {
            scores: scores
                .iter()
                .enumerate()
                .map(|(sample_id, &dissimilarity)| ScoredSample {
                    sample_id,
                    dissimilarity,
                    label,
                })
                .collect(),
        }
    }

    pub fn from_labeled(normal: &[f64], anomaly: &[f64]) -> Self {
        let mut set = Self::from_scores(normal, Label::Normal);
        set.extend(Self::from_scores(anomaly, Label::Anomaly));
        set
    }

    /// Appends `other`, renumbering its ids after the current ones.
    pub fn extend(&mut self, other: ScoreSet) {
        let offset = self.scores.len();
        self.scores.extend(other.scores.into_iter().map(|mut s| {
            s.sample_id += offset;
            s
        }));
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.scores.iter().filter(|s| s.label == label).count()
    }

    pub fn values(&self, label: Label) -> Vec<f64> {
        self.scores
            .iter()
            .filter(|s| s.label == label)
            .map(|s| s.dissimilarity)
            .collect()
    }

    pub fn mean(&self, label: Label) -> Option<f64> {
        let v = self.values(label);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,label,dissimilarity\n");
        for s in &self.scores {
            let _ = writeln!(out, "{},{},{:e}", s.sample_id, s.label.as_str(), s.dissimilarity);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Samples scoring at or above this value are called anomalies.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auroc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(out, "{:e},{:e},{:e}", p.threshold, p.fpr, p.tpr);
        }
        out
    }
}

/// ROC by sweeping the threshold down through every distinct score. Tied
/// scores form one step, so ties contribute half credit to the area.
pub fn roc(set: &ScoreSet) -> Result<RocCurve> {
    let positives = set.count(Label::Anomaly);
    let negatives = set.count(Label::Normal);
    if positives == 0 || negatives == 0 {
        return Err(Error::InsufficientData(
            "ROC needs at least one normal and one anomaly score".into(),
        ));
    }
    if set.scores.iter().any(|s| s.dissimilarity.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut sorted: Vec<&ScoredSample> = set.scores.iter().collect();
    sorted.sort_by(|a, b| b.dissimilarity.total_cmp(&a.dissimilarity));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area in units of (one positive × one negative).
    let mut area2 = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].dissimilarity;
        let (tp0, fp0) = (tp, fp);
        while i < sorted.len() && sorted[i].dissimilarity == threshold {
            match sorted[i].label {
                Label::Anomaly => tp += 1,
                Label::Normal => fp += 1,
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        });
    }
    let auroc = area2 as f64 / (2.0 * p * n);
    Ok(RocCurve { points, auroc })
}

/// Shorthand for `roc(..).auroc` on separate normal/anomaly score lists.
pub fn auroc(normal: &[f64], anomaly: &[f64]) -> Result<f64> {
    Ok(roc(&ScoreSet::from_labeled(normal, anomaly))?.auroc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges spanning `[0, max score]`.
    pub edges: Vec<f64>,
    pub normal: Vec<u64>,
    pub anomaly: Vec<u64>,
}

pub const DEFAULT_BINS: usize = 100;

/// Frequency tables for both labels over a shared range `[0, max score]`.
pub fn histogram(set: &ScoreSet, bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    if set.is_empty() {
        return Err(Error::InsufficientData("histogram of an empty score set".into()));
    }
    if set.scores.iter().any(|s| !(s.dissimilarity >= 0.0) || !s.dissimilarity.is_finite()) {
        return Err(Error::InvalidArgument(
            "dissimilarities must be finite and non-negative".into(),
        ));
    }
    let max = set.scores.iter().map(|s| s.dissimilarity).fold(0.0, f64::max);
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut normal = vec![0u64; bins];
    let mut anomaly = vec![0u64; bins];
    for s in &set.scores {
        let bin = ((s.dissimilarity / width) as usize).min(bins - 1);
        match s.label {
            Label::Normal => normal[bin] += 1,
            Label::Anomaly => anomaly[bin] += 1,
        }
    }
    Ok(Histogram {
        edges,
        normal,
        anomaly,
    })
}

impl Histogram {
    /// Shared area of the two curves after normalizing each to unit mass;
    /// 1 for identical distributions, 0 for disjoint ones.
    pub fn overlap(&self) -> f64 {
        let total = |v: &[u64]| v.iter().sum::<u64>().max(1) as f64;
        let (tn, ta) = (total(&self.normal), total(&self.anomaly));
        self.normal
            .iter()
            .zip(&self.anomaly)
            .map(|(&a, &b)| (a as f64 / tn).min(b as f64 / ta))
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,normal,anomaly\n");
        for i in 0..self.normal.len() {
            let _ = writeln!(
                out,
                "{:e},{:e},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.normal[i],
                self.anomaly[i]
            );
        }
        out
    }
}

/// Two-class linear discriminant with a shared, ridge-regularized covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub mean_normal: Vec<f64>,
    pub mean_anomaly: Vec<f64>,
    pub covariance_inverse: Matrix,
    pub prior_normal: f64,
    pub prior_anomaly: f64,
    weights: Vec<f64>,
    bias: f64,
}

/// Closed-form LDA fit. The pooled covariance gets `λI` added with
/// `λ = 1e-6 · trace / dim`.
pub fn lda_fit(features: &Matrix, labels: &[Label]) -> Result<LdaModel> {
    if labels.len() != features.rows() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} samples",
            labels.len(),
            features.rows()
        )));
    }
    let n_normal = labels.iter().filter(|&&l| l == Label::Normal).count();
    let n_anomaly = labels.len() - n_normal;
    if n_normal < 2 || n_anomaly < 2 {
        return Err(Error::InsufficientData(
            "LDA needs at least two samples per class".into(),
        ));
    }
    let dim = features.cols();
    let class_mean = |label: Label, count: usize| {
        let mut mean = vec![0.0; dim];
        for (row, _) in features.row_iter().zip(labels).filter(|(_, &l)| l == label) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        mean
    };
    let mean_normal = class_mean(Label::Normal, n_normal);
    let mean_anomaly = class_mean(Label::Anomaly, n_anomaly);

    // Centered rows in original sample order, so relabeling leaves them unchanged.
    let mut centered = features.clone();
    for (i, &label) in labels.iter().enumerate() {
        let mean = match label {
            Label::Normal => &mean_normal,
            Label::Anomaly => &mean_anomaly,
        };
        for (x, m) in centered.row_mut(i).iter_mut().zip(mean) {
            *x -= m;
        }
    }
    let dof = (labels.len() - 2) as f64;
    let mut cov = centered.matmul_tn(&centered)?.map(|x| x / dof);
    let trace: f64 = (0..dim).map(|i| cov.get(i, i)).sum();
    let lambda = 1e-6 * trace / dim as f64;
    for i in 0..dim {
        cov.set(i, i, cov.get(i, i) + lambda);
    }
    let covariance_inverse = spd_inverse(&cov)
        .map_err(|e| Error::Singular(format!("covariance singular after regularization: {e}")))?;

    let diff: Vec<f64> = mean_anomaly
        .iter()
        .zip(&mean_normal)
        .map(|(a, n)| a - n)
        .collect();
    let weights = mat_vec(&covariance_inverse, &diff);
    let quad = |m: &[f64]| dot(m, &mat_vec(&covariance_inverse, m));
    let prior_normal = n_normal as f64 / labels.len() as f64;
    let prior_anomaly = n_anomaly as f64 / labels.len() as f64;
    let bias = -0.5 * (quad(&mean_anomaly) - quad(&mean_normal))
        + (prior_anomaly.ln() - prior_normal.ln());
    Ok(LdaModel {
        mean_normal,
        mean_anomaly,
        covariance_inverse,
        prior_normal,
        prior_anomaly,
        weights,
        bias,
    })
}

impl LdaModel {
    /// Log-odds of the anomaly class.
    pub fn score(&self, sample: &[f64]) -> Result<f64> {
        if sample.len() != self.weights.len() {
            return Err(Error::Shape {
                op: "lda_score",
                left: (1, sample.len()),
                right: (1, self.weights.len()),
            });
        }
        Ok(dot(&self.weights, sample) + self.bias)
    }

    pub fn score_rows(&self, samples: &Matrix) -> Result<Vec<f64>> {
        samples.row_iter().map(|r| self.score(r)).collect()
    }
}

pub fn lda_score(model: &LdaModel, sample: &[f64]) -> Result<f64> {
    model.score(sample)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.row_iter().map(|r| dot(r, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    struct Identity(usize);

    impl Reconstructor for Identity {
        fn input_width(&self) -> usize {
            self.0
        }
        fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
            Ok(x.clone())
        }
        fn max_abs_param(&self) -> f64 {
            0.0
        }
    }

    /// Mann-Whitney pair count with ties as half.
    fn pairwise_auroc(normal: &[f64], anomaly: &[f64]) -> f64 {
        let mut wins = 0.0;
        for &a in anomaly {
            for &n in normal {
                if a > n {
                    wins += 1.0;
                } else if a == n {
                    wins += 0.5;
                }
            }
        }
        wins / (normal.len() * anomaly.len()) as f64
    }

    #[test]
    fn identity_model_scores_zero_and_is_order_preserving() {
        let x = Matrix::from_rows(&[[0.1, 0.2], [0.5, 0.5], [0.9, 0.0]]).unwrap();
        let s = score(&Identity(2), &x, Label::Normal).unwrap();
        assert!(s.scores.iter().all(|s| s.dissimilarity == 0.0));
        assert!(score(&Identity(3), &x, Label::Normal).is_err());
    }

    #[test]
    fn perfect_separation() {
        assert_eq!(auroc(&[0.1, 0.2, 0.3], &[0.5, 0.9]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5, 0.9], &[0.1, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn hand_checked_quarter_miss() {
        assert_eq!(auroc(&[0.1, 0.4], &[0.3, 0.9]).unwrap(), 0.75);
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(auroc(&[0.5, 0.5], &[0.5]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.2, 0.5], &[0.5]).unwrap(), 0.75);
    }

    #[test]
    fn single_label_rejected() {
        assert!(roc(&ScoreSet::from_scores(&[0.1, 0.2], Label::Normal)).is_err());
    }

    #[test]
    fn roc_curve_shape() {
        let curve = roc(&ScoreSet::from_labeled(&[0.1, 0.4, 0.4], &[0.3, 0.4, 0.9])).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in curve.points.windows(2) {
            assert!(w[1].tpr >= w[0].tpr && w[1].fpr >= w[0].fpr);
        }
    }

    #[test]
    fn random_labels_give_half() {
        let mut rng = Rng::new(17);
        let (mut normal, mut anomaly) = (Vec::new(), Vec::new());
        for _ in 0..4000 {
            let s = rng.uniform();
            if rng.uniform() < 0.5 {
                normal.push(s);
            } else {
                anomaly.push(s);
            }
        }
        let a = auroc(&normal, &anomaly).unwrap();
        assert!((a - 0.5).abs() < 0.05, "{a}");
    }

    #[test]
    fn trapezoid_matches_pairwise_on_random_sets() {
        let mut rng = Rng::new(1234);
        for _ in 0..100 {
            let n = 1 + rng.below(25);
            let m = 1 + rng.below(25);
            // Coarse grid so ties are common.
            let mut draw = |k| (0..k).map(|_| rng.below(10) as f64 / 10.0).collect::<Vec<_>>();
            let normal = draw(n);
            let anomaly = draw(m);
            let a = auroc(&normal, &anomaly).unwrap();
            assert!((a - pairwise_auroc(&normal, &anomaly)).abs() < 1e-9);
        }
    }

    #[test]
    fn histogram_conserves_counts() {
        let set = ScoreSet::from_labeled(&[0.0, 0.1, 0.5, 1.0], &[0.9, 1.0, 2.0]);
        let h = histogram(&set, 10).unwrap();
        assert_eq!(h.normal.iter().sum::<u64>(), 4);
        assert_eq!(h.anomaly.iter().sum::<u64>(), 3);
        assert_eq!(h.edges.len(), 11);
        assert_eq!(*h.edges.last().unwrap(), 2.0);
        assert_eq!(h.anomaly[9], 1);
    }

    #[test]
    fn histogram_of_equal_scores_uses_one_bin() {
        let set = ScoreSet::from_labeled(&[0.3, 0.3], &[0.3]);
        let h = histogram(&set, 5).unwrap();
        let occupied = (0..5).filter(|&i| h.normal[i] + h.anomaly[i] > 0).count();
        assert_eq!(occupied, 1);
        assert_eq!(h.overlap(), 1.0);
    }

    #[test]
    fn histogram_errors() {
        assert!(histogram(&ScoreSet::default(), 10).is_err());
        assert!(histogram(&ScoreSet::from_labeled(&[0.1], &[0.2]), 1).is_err());
    }

    fn blobs(rng: &mut Rng, n: usize, center: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..3).map(|_| center + rng.normal()).collect())
            .collect()
    }

    fn stacked(normal: &[Vec<f64>], anomaly: &[Vec<f64>]) -> (Matrix, Vec<Label>) {
        let rows: Vec<Vec<f64>> = normal.iter().chain(anomaly).cloned().collect();
        let labels = std::iter::repeat_n(Label::Normal, normal.len())
            .chain(std::iter::repeat_n(Label::Anomaly, anomaly.len()))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn lda_separates_blobs() {
        let mut rng = Rng::new(5);
        let (x, labels) = stacked(&blobs(&mut rng, 200, 0.0), &blobs(&mut rng, 200, 5.0));
        let lda = lda_fit(&x, &labels).unwrap();
        assert!((lda.prior_normal + lda.prior_anomaly - 1.0).abs() < 1e-15);
        let scores = lda.score_rows(&x).unwrap();
        let a = auroc(&scores[..200], &scores[200..]).unwrap();
        assert!(a >= 0.99, "{a}");
    }

    #[test]
    fn lda_swapped_labels_negate_scores() {
        let mut rng = Rng::new(6);
        let (x, labels) = stacked(&blobs(&mut rng, 30, 0.0), &blobs(&mut rng, 20, 1.0));
        let swapped: Vec<Label> = labels
            .iter()
            .map(|l| match l {
                Label::Normal => Label::Anomaly,
                Label::Anomaly => Label::Normal,
            })
            .collect();
        let a = lda_fit(&x, &labels).unwrap();
        let b = lda_fit(&x, &swapped).unwrap();
        for row in x.row_iter() {
            assert_eq!(a.score(row).unwrap(), -b.score(row).unwrap());
        }
    }

    #[test]
    fn lda_without_signal_is_chance() {
        let mut rng = Rng::new(7);
        let (train, labels) = stacked(&blobs(&mut rng, 500, 0.0), &blobs(&mut rng, 500, 0.0));
        let lda = lda_fit(&train, &labels).unwrap();
        let (test, _) = stacked(&blobs(&mut rng, 1000, 0.0), &blobs(&mut rng, 1000, 0.0));
        let s = lda.score_rows(&test).unwrap();
        let a = auroc(&s[..1000], &s[1000..]).unwrap();
        assert!((a - 0.5).abs() < 0.05, "{a}");
    }

    #[test]
    fn lda_errors() {
        let x = Matrix::filled(4, 2, 1.0);
        let labels = [Label::Normal, Label::Normal, Label::Anomaly, Label::Anomaly];
        assert!(matches!(lda_fit(&x, &labels), Err(Error::Singular(_))));
        assert!(lda_fit(&x, &labels[..3]).is_err());
        let one_anomaly = [Label::Normal, Label::Normal, Label::Normal, Label::Anomaly];
        assert!(matches!(
            lda_fit(&x, &one_anomaly),
            Err(Error::InsufficientData(_))
        ));
    }
}
