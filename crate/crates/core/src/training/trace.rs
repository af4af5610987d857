//! Per-epoch training traces.
//!
//! The full row carries `epoch, accuracy, precision, recall, f1, lr,
//! wall_time_ms`. Wall time differs between otherwise identical runs, so the
//! untimed form (without the last column) is the one to diff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl EpochTrace {
    pub fn new(epoch: usize, report: &MetricsReport, lr: f64, wall_time_ms: f64) -> Self {
        Self {
            epoch,
            accuracy: report.accuracy,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            lr,
            wall_time_ms: Some(wall_time_ms),
        }
    }

    fn untimed(&self) -> Self {
        Self {
            wall_time_ms: None,
            ..self.clone()
        }
    }
}

fn rows(trace: &[EpochTrace], timed: bool) -> Vec<EpochTrace> {
    trace
        .iter()
        .map(|t| if timed { t.clone() } else { t.untimed() })
        .collect()
}

pub fn write_trace_csv(trace: &[EpochTrace], timed: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if trace.is_empty() {
        let mut header = vec!["epoch", "accuracy", "precision", "recall", "f1", "lr"];
        if timed {
            header.push("wall_time_ms");
        }
        w.write_record(header).expect("in-memory write");
    }
    for row in rows(trace, timed) {
        if timed && row.wall_time_ms.is_none() {
            // keep the column count stable
            w.serialize(EpochTrace {
                wall_time_ms: Some(0.0),
                ..row
            })
            .expect("in-memory write");
        } else {
            w.serialize(row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn write_trace_json(trace: &[EpochTrace], timed: bool) -> String {
    serde_json::to_string_pretty(&rows(trace, timed)).expect("trace serializes")
}

fn check(trace: Vec<EpochTrace>) -> Result<Vec<EpochTrace>> {
    for (k, t) in trace.iter().enumerate() {
        if t.epoch != k + 1 {
            return Err(Error::Data(format!("trace row {} has epoch {}", k + 1, t.epoch)));
        }
        if [t.accuracy, t.precision, t.recall, t.f1].iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Data(format!("epoch {}: metric outside [0, 1]", t.epoch)));
        }
    }
    Ok(trace)
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<EpochTrace>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<EpochTrace>, _>>()?;
    check(rows)
}

pub fn parse_trace_json(text: &str) -> Result<Vec<EpochTrace>> {
    check(serde_json::from_str(text)?)
}
