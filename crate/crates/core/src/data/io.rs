//! Encoded dataset files and the spec sidecar.
//!
//! The encoded dataset is a CSV: one column per encoded feature, named as in
//! [`EncodedDataset::feature_names`] (`amount`, `merchant=grocery`, ...),
//! followed by a final `label` column holding 0 or 1. Floats use shortest
//! round-trip formatting.
//!
//! The sidecar is JSON:
//!
//! ```json
//! {
//!   "format": "qrbm-specs",
//!   "version": 1,
//!   "columns": [
//!     {"kind": "numerical", "name": "amount", "mean": 12.5, "std": 3.25},
//!     {"kind": "categorical", "name": "merchant", "categories": ["a", "b"]},
//!     {"kind": "label", "name": "is_fraud"}
//!   ],
//!   "feature_names": ["amount", "merchant=a", "merchant=b"],
//!   "provenance": {"source": "tx.csv", "seed": 7, "dropped": [], "unknown_categories": 0}
//! }
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ColumnSpec, EncodedDataset, Provenance};
use crate::error::{Error, Result};

pub const SPEC_FORMAT: &str = "qrbm-specs";
pub const SPEC_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub format: String,
    pub version: u32,
    pub columns: Vec<ColumnSpec>,
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl SpecFile {
    pub fn from_dataset(ds: &EncodedDataset) -> Self {
        Self {
            format: SPEC_FORMAT.into(),
            version: SPEC_FORMAT_VERSION,
            columns: ds.specs.clone(),
            feature_names: ds.feature_names.clone(),
            provenance: ds.provenance.clone(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.iter().map(ColumnSpec::width).sum()
    }
}

pub fn write_spec_file(spec: &SpecFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(spec)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn parse_spec_file(text: &str) -> Result<SpecFile> {
    let spec: SpecFile = serde_json::from_str(text)?;
    if spec.format != SPEC_FORMAT || spec.version != SPEC_FORMAT_VERSION {
        return Err(Error::Data(format!(
            "expected {SPEC_FORMAT} version {SPEC_FORMAT_VERSION}, got {} version {}",
            spec.format, spec.version
        )));
    }
    if spec.feature_names.len() != spec.n_features() {
        return Err(Error::Data("feature_names do not match the column specs".into()));
    }
    let labels = spec.columns.iter().filter(|c| matches!(c, ColumnSpec::Label { .. })).count();
    if labels != 1 {
        return Err(Error::Data("spec file must name exactly one label column".into()));
    }
    Ok(spec)
}

pub fn read_spec_file(path: &Path) -> Result<SpecFile> {
    parse_spec_file(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_encoded_csv(ds: &EncodedDataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = ds.feature_names.clone();
    header.push("label".into());
    w.write_record(&header).expect("in-memory write");
    for (row, y) in ds.features.rows().into_iter().zip(&ds.labels) {
        let mut rec: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        rec.push(y.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Features, labels and feature names from an encoded dataset file.
pub fn parse_encoded_csv(text: &str) -> Result<(Array2<f64>, Vec<u8>, Vec<String>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.last().map(String::as_str) != Some("label") {
        return Err(Error::Data("encoded dataset must end with a label column".into()));
    }
    let names = header[..header.len() - 1].to_vec();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        for cell in rec.iter().take(names.len()) {
            let x: f64 = cell
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| Error::parse(line, format!("{cell:?} is not a finite number")))?;
            values.push(x);
        }
        labels.push(super::parse_label(&rec[names.len()]).map_err(|e| Error::parse(line, e))?);
    }
    let features = Array2::from_shape_vec((labels.len(), names.len()), values)
        .map_err(|e| Error::Data(e.to_string()))?;
    Ok((features, labels, names))
}

pub fn read_encoded_csv(path: &Path) -> Result<(Array2<f64>, Vec<u8>, Vec<String>)> {
    parse_encoded_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
