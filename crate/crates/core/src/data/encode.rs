use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{parse_label, ColumnConfig, ColumnKind, Table};
use crate::error::{Error, Result};
use crate::rbm::{LabelBlock, UnitKind};

/// How one raw column is encoded. Fitted on training rows only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ColumnSpec {
    /// `(x - mean) / std`, `std` being the sample standard deviation.
    Numerical { name: String, mean: f64, std: f64 },
    /// One-hot over `categories` (sorted, deduplicated).
    Categorical { name: String, categories: Vec<String> },
    Label { name: String },
}

impl ColumnSpec {
    pub fn name(&self) -> &str {
        match self {
            ColumnSpec::Numerical { name, .. } | ColumnSpec::Categorical { name, .. } | ColumnSpec::Label { name } => name,
        }
    }

    /// Number of encoded feature columns.
    pub fn width(&self) -> usize {
        match self {
            ColumnSpec::Numerical { .. } => 1,
            ColumnSpec::Categorical { categories, .. } => categories.len(),
            ColumnSpec::Label { .. } => 0,
        }
    }

    fn feature_names(&self) -> Vec<String> {
        match self {
            ColumnSpec::Numerical { name, .. } => vec![name.clone()],
            ColumnSpec::Categorical { name, categories } => categories.iter().map(|c| format!("{name}={c}")).collect(),
            ColumnSpec::Label { .. } => vec![],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ColumnSpec::Numerical { name, mean, std } if !(mean.is_finite() && std.is_finite() && *std > 0.0) => {
                Err(Error::Data(format!("column {name:?}: invalid fitted statistics")))
            }
            ColumnSpec::Categorical { name, categories } => {
                let sorted: Vec<&String> = categories.iter().collect::<BTreeSet<_>>().into_iter().collect();
                if categories.is_empty() || sorted.len() != categories.len() || sorted.iter().zip(categories).any(|(a, b)| *a != b) {
                    return Err(Error::Data(format!("column {name:?}: categories must be non-empty, sorted and unique")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    /// Earlier column it correlated with.
    pub kept: String,
    pub r: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub seed: Option<u64>,
    pub dropped: Vec<DroppedColumn>,
    /// Rows whose categorical value was not seen at fit time (encoded as an
    /// all-zero block).
    pub unknown_categories: usize,
}

/// Encoded features (label units excluded), binary labels and the specs that
/// produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub specs: Vec<ColumnSpec>,
    pub provenance: Provenance,
}

impl EncodedDataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Visible-unit kinds for an RBM classifier over this dataset: one per
    /// feature, then a two-unit label block.
    pub fn unit_kinds(&self) -> Vec<UnitKind> {
        let mut kinds = Vec::with_capacity(self.n_features() + 2);
        for spec in &self.specs {
            let kind = match spec {
                ColumnSpec::Numerical { .. } => UnitKind::Gaussian,
                _ => UnitKind::Bernoulli,
            };
            kinds.extend(std::iter::repeat_n(kind, spec.width()));
        }
        kinds.extend([UnitKind::Bernoulli; 2]);
        kinds
    }

    pub fn label_block(&self) -> LabelBlock {
        LabelBlock {
            start: self.n_features(),
            len: 2,
        }
    }

    /// Features followed by the one-hot label: label 0 is `[1, 0]`, label 1
    /// is `[0, 1]`.
    pub fn visible_matrix(&self) -> Array2<f64> {
        let n = self.n_features();
        let mut out = Array2::zeros((self.n_rows(), n + 2));
        out.slice_mut(ndarray::s![.., ..n]).assign(&self.features);
        for (k, &y) in self.labels.iter().enumerate() {
            out[[k, n + y as usize]] = 1.0;
        }
        out
    }

    /// Removes numerical columns by name, from both the features and the specs.
    pub fn drop_numerical(&mut self, names: &[String]) -> Result<()> {
        let mut keep_cols = Vec::new();
        let mut col = 0;
        let mut specs = Vec::new();
        for spec in &self.specs {
            let width = spec.width();
            let dropped = names.iter().any(|n| n == spec.name());
            if dropped && !matches!(spec, ColumnSpec::Numerical { .. }) {
                return Err(Error::Data(format!("column {:?} is not numerical", spec.name())));
            }
            if !dropped {
                keep_cols.extend(col..col + width);
                specs.push(spec.clone());
            }
            col += width;
        }
        self.features = self.features.select(Axis(1), &keep_cols);
        self.feature_names = keep_cols.iter().map(|&c| self.feature_names[c].clone()).collect();
        self.specs = specs;
        Ok(())
    }

    /// Which spec each encoded column came from.
    pub fn feature_sources(&self) -> Vec<usize> {
        self.specs
            .iter()
            .enumerate()
            .flat_map(|(k, s)| std::iter::repeat_n(k, s.width()))
            .collect()
    }
}

fn cell<'a>(table: &'a Table, row: usize, col: usize) -> Result<&'a str> {
    let v = table.rows[row][col].as_str();
    if v.is_empty() {
        return Err(Error::Data(format!(
            "missing value in column {:?}, row {}",
            table.headers[col],
            row + 1
        )));
    }
    Ok(v)
}

fn numeric_column(table: &Table, col: usize) -> Result<Vec<f64>> {
    (0..table.n_rows())
        .map(|r| {
            let s = cell(table, r, col)?;
            s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                Error::Data(format!(
                    "column {:?}, row {}: {s:?} is not a finite number",
                    table.headers[col],
                    r + 1
                ))
            })
        })
        .collect()
}

/// Fits specs on `table` and encodes it. Spec order follows the table header.
pub fn fit_encode(table: &Table, config: &ColumnConfig) -> Result<EncodedDataset> {
    config.validate()?;
    for name in config.columns.keys() {
        table.column_index(name)?;
    }
    if table.n_rows() < 2 {
        return Err(Error::Data("need at least two rows to fit a standard deviation".into()));
    }
    let mut specs = Vec::new();
    for (col, name) in table.headers.iter().enumerate() {
        let kind = config
            .kind_of(name)
            .ok_or_else(|| Error::Config(format!("column {name:?} has no kind in the column config")))?;
        specs.push(match kind {
            ColumnKind::Ignore => continue,
            ColumnKind::Label => ColumnSpec::Label { name: name.clone() },
            ColumnKind::Numerical => {
                let xs = numeric_column(table, col)?;
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
                let std = var.sqrt();
                if !(std > 0.0) {
                    return Err(Error::Data(format!("column {name:?} is constant; cannot z-score it")));
                }
                ColumnSpec::Numerical {
                    name: name.clone(),
                    mean,
                    std,
                }
            }
            ColumnKind::Categorical => {
                let cats: BTreeSet<String> = (0..table.n_rows())
                    .map(|r| cell(table, r, col).map(str::to_string))
                    .collect::<Result<_>>()?;
                ColumnSpec::Categorical {
                    name: name.clone(),
                    categories: cats.into_iter().collect(),
                }
            }
        });
    }
    if !specs.iter().any(|s| s.width() > 0) {
        return Err(Error::Data("no feature columns to encode".into()));
    }
    transform(table, &specs)
}

/// Encodes `table` with previously fitted specs. Columns are located by name.
pub fn transform(table: &Table, specs: &[ColumnSpec]) -> Result<EncodedDataset> {
    let label_specs: Vec<&ColumnSpec> = specs.iter().filter(|s| matches!(s, ColumnSpec::Label { .. })).collect();
    let [label_spec] = label_specs.as_slice() else {
        return Err(Error::Data("specs must contain exactly one label column".into()));
    };
    for s in specs {
        s.validate()?;
    }
    if table.n_rows() == 0 {
        return Err(Error::Data("table has no rows".into()));
    }
    let width: usize = specs.iter().map(ColumnSpec::width).sum();
    let mut features = Array2::zeros((table.n_rows(), width));
    let mut unknown = 0;
    let mut offset = 0;
    for spec in specs {
        let col = table.column_index(spec.name())?;
        match spec {
            ColumnSpec::Numerical { mean, std, .. } => {
                for (r, x) in numeric_column(table, col)?.into_iter().enumerate() {
                    features[[r, offset]] = (x - mean) / std;
                }
            }
            ColumnSpec::Categorical { categories, .. } => {
                for r in 0..table.n_rows() {
                    let v = cell(table, r, col)?;
                    match categories.binary_search_by(|c| c.as_str().cmp(v)) {
                        Ok(k) => features[[r, offset + k]] = 1.0,
                        Err(_) => unknown += 1,
                    }
                }
            }
            ColumnSpec::Label { .. } => {}
        }
        offset += spec.width();
    }
    let label_col = table.column_index(label_spec.name())?;
    let labels = (0..table.n_rows())
        .map(|r| parse_label(&table.rows[r][label_col]).map_err(|e| Error::Data(format!("row {}: {e}", r + 1))))
        .collect::<Result<Vec<u8>>>()?;
    Ok(EncodedDataset {
        features,
        labels,
        feature_names: specs.iter().flat_map(ColumnSpec::feature_names).collect(),
        specs: specs.to_vec(),
        provenance: Provenance {
            unknown_categories: unknown,
            ..Provenance::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config() -> ColumnConfig {
        ColumnConfig::parse_toml("[columns]\nx = \"numerical\"\nc = \"categorical\"\ny = \"label\"\nid = \"ignore\"\n").unwrap()
    }

    fn table() -> Table {
        Table::parse_csv("id,x,c,y\n7,1,A,0\n8,2,B,1\n9,3,A,0\n").unwrap()
    }

    #[test]
    fn worked_examples() {
        let ds = fit_encode(&table(), &config()).unwrap();
        assert_eq!(ds.feature_names, ["x", "c=A", "c=B"]);
        let x: Vec<f64> = ds.features.column(0).to_vec();
        assert_eq!(x, [-1.0, 0.0, 1.0]);
        assert_eq!(ds.features.row(0).to_vec(), [-1.0, 1.0, 0.0]);
        assert_eq!(ds.features.row(1).to_vec(), [0.0, 0.0, 1.0]);
        assert_eq!(ds.features.row(2).to_vec(), [1.0, 1.0, 0.0]);
        assert_eq!(ds.labels, [0, 1, 0]);
        assert_eq!(ds.feature_sources(), [0, 1, 1]);
        assert_eq!(
            ds.unit_kinds(),
            [UnitKind::Gaussian, UnitKind::Bernoulli, UnitKind::Bernoulli, UnitKind::Bernoulli, UnitKind::Bernoulli]
        );
        let v = ds.visible_matrix();
        assert_eq!(v.row(1).to_vec(), [0.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn re_encoding_is_idempotent_and_unknowns_are_flagged() {
        let ds = fit_encode(&table(), &config()).unwrap();
        let again = transform(&table(), &ds.specs).unwrap();
        assert_eq!(again, ds);

        let unseen = Table::parse_csv("x,c,y\n5,Z,1\n2,B,0\n").unwrap();
        let t = transform(&unseen, &ds.specs).unwrap();
        assert_eq!(t.provenance.unknown_categories, 1);
        assert_eq!(t.features.row(0).to_vec(), [3.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        let constant = Table::parse_csv("x,c,y,id\n1,A,0,1\n1,B,1,2\n").unwrap();
        let err = fit_encode(&constant, &config()).unwrap_err().to_string();
        assert!(err.contains("\"x\""), "{err}");

        let missing = Table::parse_csv("x,c,y,id\n1,,0,1\n2,B,1,2\n").unwrap();
        assert!(fit_encode(&missing, &config()).unwrap_err().to_string().contains("missing"));

        let unknown_kind = Table::parse_csv("x,c,y,id,extra\n1,A,0,1,q\n2,B,1,2,r\n").unwrap();
        assert!(matches!(fit_encode(&unknown_kind, &config()), Err(Error::Config(_))));

        let not_number = Table::parse_csv("x,c,y,id\n1,A,0,1\nabc,B,1,2\n").unwrap();
        assert!(fit_encode(&not_number, &config()).is_err());

        let missing_col = Table::parse_csv("x,y,id\n1,0,1\n2,1,2\n").unwrap();
        assert!(fit_encode(&missing_col, &config()).is_err());
    }

    #[test]
    fn no_leakage_between_fit_and_transform() {
        let train = Table::parse_csv("x,c,y,id\n1,A,0,1\n2,B,1,2\n3,A,0,3\n").unwrap();
        let test = Table::parse_csv("x,c,y,id\n10,A,0,1\n20,B,1,2\n").unwrap();
        let ds = fit_encode(&train, &config()).unwrap();
        let t = transform(&test, &ds.specs).unwrap();
        let col = t.features.column(0);
        let mean = col.sum() / col.len() as f64;
        assert!(mean.abs() > 1.0, "test statistics must not be re-fitted");
        assert_abs_diff_eq!(t.features[[0, 0]], 8.0, epsilon = 1e-12);
    }

    #[test]
    fn drop_numerical_updates_specs() {
        let cfg = ColumnConfig::parse_toml("[columns]\na = \"numerical\"\nb = \"numerical\"\nc = \"categorical\"\ny = \"label\"\n").unwrap();
        let t = Table::parse_csv("a,c,b,y\n1,P,4,0\n2,Q,5,1\n4,P,3,0\n").unwrap();
        let mut ds = fit_encode(&t, &cfg).unwrap();
        ds.drop_numerical(&["b".into()]).unwrap();
        assert_eq!(ds.feature_names, ["a", "c=P", "c=Q"]);
        assert_eq!(ds.specs.len(), 3);
        assert!(ds.drop_numerical(&["c".into()]).is_err());
        assert_eq!(transform(&t, &ds.specs).unwrap().features, ds.features);
    }
}
