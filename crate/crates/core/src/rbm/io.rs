//! Model files.
//!
//! A model is stored as a single JSON object:
//!
//! ```text
//! {
//!   "format": "qrbm-model",
//!   "version": 1,
//!   "n_visible": 3,
//!   "n_hidden": 2,
//!   "kinds": ["gaussian", "bernoulli", "bernoulli"],
//!   "label_block": {"start": 1, "len": 2},     // or null
//!   "weights": [w00, w01, w10, w11, w20, w21], // row-major, n_visible × n_hidden
//!   "visible_bias": [c0, c1, c2],
//!   "hidden_bias": [b0, b1]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so save → load is exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{LabelBlock, RbmModel, UnitKind};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "qrbm-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    n_visible: usize,
    n_hidden: usize,
    kinds: Vec<UnitKind>,
    label_block: Option<LabelBlock>,
    weights: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

impl From<&RbmModel> for ModelFile {
    fn from(m: &RbmModel) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            n_visible: m.n_visible(),
            n_hidden: m.n_hidden(),
            kinds: m.kinds.clone(),
            label_block: m.label_block,
            weights: m.weights.iter().copied().collect(),
            visible_bias: m.visible_bias.to_vec(),
            hidden_bias: m.hidden_bias.to_vec(),
        }
    }
}

impl TryFrom<ModelFile> for RbmModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format != MODEL_FORMAT {
            return Err(Error::Integrity(format!("not a model file (format {:?})", f.format)));
        }
        if f.version != MODEL_FORMAT_VERSION {
            return Err(Error::Integrity(format!("unsupported model file version {}", f.version)));
        }
        if f.kinds.len() != f.n_visible {
            return Err(Error::contract("kinds do not match n_visible"));
        }
        let n_weights = f
            .n_visible
            .checked_mul(f.n_hidden)
            .ok_or_else(|| Error::contract("model dimensions overflow"))?;
        if f.weights.len() != n_weights {
            return Err(Error::contract(format!(
                "weights hold {} values, expected {}",
                f.weights.len(),
                n_weights
            )));
        }
        let weights = Array2::from_shape_vec((f.n_visible, f.n_hidden), f.weights)
            .map_err(|e| Error::contract(e.to_string()))?;
        RbmModel::from_parts(
            weights,
            Array1::from(f.visible_bias),
            Array1::from(f.hidden_bias),
            f.kinds,
            f.label_block,
        )
    }
}

pub fn write_model<W: Write>(model: &RbmModel, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &ModelFile::from(model))?;
    Ok(())
}

pub fn read_model<R: Read>(reader: R) -> Result<RbmModel> {
    let file: ModelFile = serde_json::from_reader(reader)?;
    file.try_into()
}

pub fn save_model(model: &RbmModel, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    buf.push(b'\n');
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<RbmModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(bytes.as_slice())
}
