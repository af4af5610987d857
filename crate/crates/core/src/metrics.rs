//! Classification with a trained RBM and the binary metrics used to compare
//! training methods. Fraud is the positive class and label index 1.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbm::RbmModel;

/// Label index of the positive (fraud) class.
pub const POSITIVE_LABEL: usize = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    /// Counts from binary truth and prediction vectors (1 = positive).
    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::contract(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (1, 1) => cm.tp += 1,
                (0, 1) => cm.fp += 1,
                (1, 0) => cm.fn_ += 1,
                (0, 0) => cm.tn += 1,
                _ => return Err(Error::domain(format!("labels must be 0 or 1, got ({t}, {p})"))),
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same predictions scored with the other class as positive.
    pub fn swap_positive(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    /// Metrics whose denominator was zero; they are reported as 0.
    pub undefined: Vec<String>,
}

fn ratio(num: u64, den: u64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        if cm.total() == 0 {
            return Err(Error::domain("no rows were evaluated"));
        }
        let mut undefined = Vec::new();
        let accuracy = (cm.tp + cm.tn) as f64 / cm.total() as f64;
        let precision = ratio(cm.tp, cm.tp + cm.fp, "precision", &mut undefined);
        let recall = ratio(cm.tp, cm.tp + cm.fn_, "recall", &mut undefined);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            undefined.push("f1".into());
            0.0
        };
        Ok(Self {
            accuracy,
            precision,
            recall,
            f1,
            confusion: cm,
            undefined,
        })
    }

    /// Ranking used for best-epoch and grid-search selection: F1, then
    /// precision, then recall, higher first.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .f1
            .total_cmp(&self.f1)
            .then(other.precision.total_cmp(&self.precision))
            .then(other.recall.total_cmp(&self.recall))
    }
}

/// The documented metrics file: the four metrics, the confusion counts and the
/// epoch they belong to (absent for standalone evaluations).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub epoch: Option<usize>,
}

impl MetricsRecord {
    pub fn new(report: &MetricsReport, epoch: Option<usize>) -> Self {
        let cm = report.confusion;
        Self {
            accuracy: report.accuracy,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            tp: cm.tp,
            fp: cm.fp,
            fn_: cm.fn_,
            tn: cm.tn,
            epoch,
        }
    }

    /// Recomputes the report from the counts and checks the stored metrics
    /// agree with them.
    pub fn to_report(&self) -> Result<MetricsReport> {
        let report = MetricsReport::from_confusion(ConfusionMatrix {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            tn: self.tn,
        })?;
        let pairs = [
            (self.accuracy, report.accuracy),
            (self.precision, report.precision),
            (self.recall, report.recall),
            (self.f1, report.f1),
        ];
        if pairs.iter().any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::Integrity("metrics disagree with their confusion counts".into()));
        }
        Ok(report)
    }
}

pub fn metrics_json(report: &MetricsReport, epoch: Option<usize>) -> String {
    serde_json::to_string_pretty(&MetricsRecord::new(report, epoch)).expect("metrics serialize")
}

pub fn parse_metrics_json(text: &str) -> Result<MetricsRecord> {
    let record: MetricsRecord = serde_json::from_str(text)?;
    record.to_report()?;
    Ok(record)
}

/// Free energy of the full visible vector with the label block clamped to
/// each candidate label in turn.
pub fn clamped_free_energies(model: &RbmModel, features: ArrayView1<f64>) -> Result<Vec<f64>> {
    let block = model
        .label_block
        .ok_or_else(|| Error::contract("model has no label block; cannot classify"))?;
    let n_features = model.n_visible() - block.len;
    if features.len() != n_features {
        return Err(Error::contract(format!(
            "feature vector has length {}, model expects {n_features}",
            features.len()
        )));
    }
    let mut v = Array1::zeros(model.n_visible());
    let mut src = features.iter();
    for i in (0..model.n_visible()).filter(|i| !block.range().contains(i)) {
        v[i] = *src.next().unwrap();
    }
    (0..block.len)
        .map(|label| {
            v.slice_mut(ndarray::s![block.range()]).fill(0.0);
            v[block.start + label] = 1.0;
            model.free_energy(&v)
        })
        .collect()
}

/// Label with the lowest clamped free energy; ties go to the lowest index.
pub fn predict_label(model: &RbmModel, features: ArrayView1<f64>) -> Result<usize> {
    let energies = clamped_free_energies(model, features)?;
    let mut best = 0;
    for (k, &f) in energies.iter().enumerate().skip(1) {
        if f < energies[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Scores a binary classifier on `features` (one row per example, label
/// units excluded) against 0/1 `labels`.
pub fn evaluate(model: &RbmModel, features: &Array2<f64>, labels: &[u8]) -> Result<MetricsReport> {
    if features.nrows() == 0 {
        return Err(Error::domain("empty test set"));
    }
    if features.nrows() != labels.len() {
        return Err(Error::contract(format!(
            "{} feature rows but {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    match model.label_block {
        Some(b) if b.len == 2 => {}
        Some(b) => return Err(Error::contract(format!("binary evaluation needs 2 label units, model has {}", b.len))),
        None => return Err(Error::contract("model has no label block; cannot classify")),
    }
    let predicted = features
        .rows()
        .into_iter()
        .map(|row| predict_label(model, row).map(|l| l as u8))
        .collect::<Result<Vec<u8>>>()?;
    MetricsReport::from_confusion(ConfusionMatrix::from_predictions(labels, &predicted)?)
}
