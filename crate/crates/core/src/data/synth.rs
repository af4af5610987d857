use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use super::{ColumnConfig, ColumnKind, Table};
use crate::error::{Error, Result};
use crate::rng;

/// Label column written by [`synth_generate`].
pub const SYNTH_LABEL: &str = "is_fraud";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub n_rows: usize,
    pub n_numeric: usize,
    pub n_categorical: usize,
    #[serde(default = "default_categories")]
    pub n_categories: usize,
    pub class_sep: f64,
    pub fraud_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_categories() -> usize {
    4
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_numeric + self.n_categorical == 0 {
            return Err(Error::Config("synthetic data needs rows and at least one feature".into()));
        }
        if self.n_categorical > 0 && self.n_categories < 2 {
            return Err(Error::Config("categorical features need at least two categories".into()));
        }
        if !(self.class_sep >= 0.0 && self.class_sep.is_finite()) {
            return Err(Error::Config("class_sep must be finite and non-negative".into()));
        }
        if !(self.fraud_rate > 0.0 && self.fraud_rate <= 0.5) {
            return Err(Error::Config(format!("fraud_rate must lie in (0, 0.5], got {}", self.fraud_rate)));
        }
        Ok(())
    }
}

/// Column kinds matching [`synth_generate`] output.
pub fn synth_column_config(params: &SynthParams) -> ColumnConfig {
    let mut cfg = ColumnConfig::default();
    for k in 0..params.n_numeric {
        cfg.columns.insert(format!("num_{k}"), ColumnKind::Numerical);
    }
    for k in 0..params.n_categorical {
        cfg.columns.insert(format!("cat_{k}"), ColumnKind::Categorical);
    }
    cfg.columns.insert(SYNTH_LABEL.into(), ColumnKind::Label);
    cfg
}

/// Fraud-like synthetic transactions.
///
/// Exactly `round(n_rows · fraud_rate)` rows are fraud, in shuffled order.
/// Numeric features are unit-variance Gaussians with mean 0 for legitimate
/// rows and `class_sep` for fraud. Categorical features take values
/// `c0..c{m-1}`; fraud favours low indices with weights
/// `exp(-class_sep · k / (m - 1))` and legitimate rows the mirror image.
pub fn synth_generate(params: &SynthParams) -> Result<Table> {
    params.validate()?;
    let mut r = rng::seeded(params.seed);
    let n_fraud = (params.n_rows as f64 * params.fraud_rate).round() as usize;
    let mut labels: Vec<u8> = (0..params.n_rows).map(|i| (i < n_fraud) as u8).collect();
    labels.shuffle(&mut r);

    let m = params.n_categories;
    let weights = |fraud: bool| -> Vec<f64> {
        (0..m)
            .map(|k| {
                let pos = if fraud { k } else { m - 1 - k };
                (-params.class_sep * pos as f64 / (m - 1).max(1) as f64).exp()
            })
            .collect()
    };
    let cat_dist = [
        WeightedIndex::new(weights(false)).map_err(|e| Error::Config(e.to_string()))?,
        WeightedIndex::new(weights(true)).map_err(|e| Error::Config(e.to_string()))?,
    ];

    let mut headers: Vec<String> = (0..params.n_numeric).map(|k| format!("num_{k}")).collect();
    headers.extend((0..params.n_categorical).map(|k| format!("cat_{k}")));
    headers.push(SYNTH_LABEL.into());

    let rows = labels
        .iter()
        .map(|&y| {
            let shift = if y == 1 { params.class_sep } else { 0.0 };
            let mut row: Vec<String> = (0..params.n_numeric)
                .map(|_| (shift + r.sample::<f64, _>(StandardNormal)).to_string())
                .collect();
            row.extend((0..params.n_categorical).map(|_| format!("c{}", cat_dist[y as usize].sample(&mut r))));
            row.push(y.to_string());
            row
        })
        .collect();
    Table::new(headers, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{fit_encode, split};

    fn params(class_sep: f64, fraud_rate: f64, seed: u64) -> SynthParams {
        SynthParams {
            n_rows: 1000,
            n_numeric: 5,
            n_categorical: 2,
            n_categories: 4,
            class_sep,
            fraud_rate,
            seed,
        }
    }

    #[test]
    fn label_counts_and_determinism() {
        let t = synth_generate(&params(1.0, 0.5, 3)).unwrap();
        let labels = t.labels(&synth_column_config(&params(1.0, 0.5, 3))).unwrap();
        assert_eq!(labels.iter().filter(|&&y| y == 1).count(), 500);
        assert_eq!(t, synth_generate(&params(1.0, 0.5, 3)).unwrap());
        assert_ne!(t, synth_generate(&params(1.0, 0.5, 4)).unwrap());
        assert_eq!(t.headers, ["num_0", "num_1", "num_2", "num_3", "num_4", "cat_0", "cat_1", "is_fraud"]);

        let t = synth_generate(&params(1.0, 0.1, 3)).unwrap();
        assert_eq!(t.labels(&synth_column_config(&params(1.0, 0.1, 3))).unwrap().iter().filter(|&&y| y == 1).count(), 100);
    }

    #[test]
    fn invalid_parameters() {
        assert!(synth_generate(&params(1.0, 0.0, 0)).is_err());
        assert!(synth_generate(&params(1.0, 0.6, 0)).is_err());
        assert!(synth_generate(&params(-1.0, 0.5, 0)).is_err());
        let mut p = params(1.0, 0.5, 0);
        p.n_categories = 1;
        assert!(synth_generate(&p).is_err());
    }

    /// Held-out accuracy of a nearest-centroid probe on the encoded features.
    fn probe_accuracy(p: &SynthParams) -> f64 {
        let t = synth_generate(p).unwrap();
        let cfg = synth_column_config(p);
        let labels = t.labels(&cfg).unwrap();
        let s = split(&labels, 0.5, p.seed).unwrap();
        let train = fit_encode(&t.subset(&s.train), &cfg).unwrap();
        let test = crate::data::transform(&t.subset(&s.test), &train.specs).unwrap();
        let centroid = |c: u8| {
            let rows: Vec<usize> = (0..train.n_rows()).filter(|&i| train.labels[i] == c).collect();
            train.features.select(ndarray::Axis(0), &rows).mean_axis(ndarray::Axis(0)).unwrap()
        };
        let (c0, c1) = (centroid(0), centroid(1));
        let correct = test
            .features
            .rows()
            .into_iter()
            .zip(&test.labels)
            .filter(|(x, &y)| {
                let d0 = (&x.to_owned() - &c0).mapv(|v| v * v).sum();
                let d1 = (&x.to_owned() - &c1).mapv(|v| v * v).sum();
                ((d1 < d0) as u8) == y
            })
            .count();
        correct as f64 / test.n_rows() as f64
    }

    #[test]
    fn separation_controls_difficulty() {
        let chance: f64 = (0..10).map(|s| probe_accuracy(&params(0.0, 0.5, s))).sum::<f64>() / 10.0;
        assert!((chance - 0.5).abs() <= 0.05, "{chance}");
        for s in 0..10 {
            let acc = probe_accuracy(&params(3.0, 0.5, s));
            assert!(acc >= 0.95, "seed {s}: {acc}");
        }
    }
}
