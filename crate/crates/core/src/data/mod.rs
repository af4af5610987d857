//! Tabular preprocessing: CSV tables, declarative column kinds, one-hot and
//! z-score encoding, class balancing, stratified splitting and a synthetic
//! fraud-like generator.

mod encode;
mod io;
mod prep;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{fit_encode, transform, ColumnSpec, DroppedColumn, EncodedDataset, Provenance};
pub use io::{
    parse_encoded_csv, parse_spec_file, read_encoded_csv, read_spec_file, write_encoded_csv, write_spec_file,
    SpecFile, SPEC_FORMAT, SPEC_FORMAT_VERSION,
};
pub use prep::{correlation_filter, pearson, split, undersample_balance, Split};
pub use synth::{synth_column_config, synth_generate, SynthParams};

/// Raw table: a header and string cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        let unique: BTreeSet<&String> = headers.iter().collect();
        if unique.len() != headers.len() {
            return Err(Error::Data("duplicate column names in header".into()));
        }
        if let Some(k) = rows.iter().position(|r| r.len() != headers.len()) {
            return Err(Error::Data(format!(
                "row {} has {} cells, header has {}",
                k + 1,
                rows[k].len(),
                headers.len()
            )));
        }
        Ok(Self { headers, rows })
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::Data("CSV has no header row".into()));
        }
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(|c| c.trim().to_string()).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Self::new(headers, rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column {name:?} not found")))
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            headers: self.headers.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Binary labels of the label column named in `config`.
    pub fn labels(&self, config: &ColumnConfig) -> Result<Vec<u8>> {
        let col = self.column_index(config.label_column()?)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(k, row)| parse_label(&row[col]).map_err(|e| Error::Data(format!("row {}: {e}", k + 1))))
            .collect()
    }
}

pub(crate) fn parse_label(cell: &str) -> std::result::Result<u8, String> {
    match cell.to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(1),
        "0" | "false" => Ok(0),
        "" => Err("missing label".into()),
        other => Err(format!("label {other:?} is not binary")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numerical,
    Categorical,
    Label,
    /// Present in the file but not used (identifiers, timestamps, ...).
    Ignore,
}

/// Column kinds by name, as read from a TOML file:
///
/// ```toml
/// keep = ["amount", "merchant"]      # optional; unlisted features are ignored
///
/// [columns]
/// amount = "numerical"
/// merchant = "categorical"
/// is_fraud = "label"
/// id = "ignore"
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnConfig {
    pub columns: BTreeMap<String, ColumnKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep: Option<Vec<String>>,
}

impl ColumnConfig {
    pub fn parse_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("column config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.label_column()?;
        if let Some(keep) = &self.keep {
            for name in keep {
                match self.columns.get(name) {
                    Some(ColumnKind::Numerical | ColumnKind::Categorical) => {}
                    _ => {
                        return Err(Error::Config(format!(
                            "keep-list entry {name:?} is not a numerical or categorical column"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn label_column(&self) -> Result<&str> {
        let labels: Vec<&String> = self
            .columns
            .iter()
            .filter(|(_, k)| **k == ColumnKind::Label)
            .map(|(n, _)| n)
            .collect();
        match labels.as_slice() {
            [one] => Ok(one.as_str()),
            [] => Err(Error::Config("column config names no label column".into())),
            _ => Err(Error::Config("column config names more than one label column".into())),
        }
    }

    /// Effective kind of a column after applying the keep-list.
    pub fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        let kind = *self.columns.get(name)?;
        match (&self.keep, kind) {
            (Some(keep), ColumnKind::Numerical | ColumnKind::Categorical) if !keep.iter().any(|k| k == name) => {
                Some(ColumnKind::Ignore)
            }
            _ => Some(kind),
        }
    }
}
