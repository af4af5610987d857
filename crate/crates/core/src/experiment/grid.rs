use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{prepare, run_prepared, ExperimentConfig, RunResult};
use crate::error::{Error, Result};
use crate::training::{LrSchedule, SamplerConfig};

/// Hyperparameter axes. An absent axis keeps the base config's value; a
/// present axis must list at least one value.
///
/// ```toml
/// n_hidden = [8, 16]
/// batch_size = [32, 64]
/// learning_rate = [0.05, 0.1]   # initial / eta0 / value, per schedule kind
/// lr_decay = [0.05]             # lambda of smooth_exp
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_hidden: Option<Vec<usize>>,
    pub batch_size: Option<Vec<usize>>,
    pub learning_rate: Option<Vec<f64>>,
    pub lr_decay: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub n_hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: Option<f64>,
    pub config: ExperimentConfig,
}

fn axis<T: Copy>(name: &str, values: &Option<Vec<T>>, base: T) -> Result<Vec<T>> {
    match values {
        None => Ok(vec![base]),
        Some(v) if v.is_empty() => Err(Error::Config(format!("grid axis {name} is empty"))),
        Some(v) => Ok(v.clone()),
    }
}

fn learning_rate(s: &LrSchedule) -> f64 {
    match *s {
        LrSchedule::ExpToZero { initial, .. } => initial,
        LrSchedule::SmoothExp { eta0, .. } => eta0,
        LrSchedule::Constant { value } => value,
    }
}

/// Cartesian product in axis order `n_hidden`, `batch_size`,
/// `learning_rate`, `lr_decay` (last axis fastest).
pub fn grid_cells(base: &ExperimentConfig, spec: &GridSpec) -> Result<Vec<GridCell>> {
    if spec == &GridSpec::default() {
        return Err(Error::Config("grid has no axes".into()));
    }
    base.validate()?;
    let base_decay = match base.train.lr {
        LrSchedule::SmoothExp { lambda, .. } => Some(lambda),
        _ => None,
    };
    if spec.lr_decay.is_some() && base_decay.is_none() {
        return Err(Error::Config("lr_decay needs a smooth_exp schedule".into()));
    }
    let hidden = axis("n_hidden", &spec.n_hidden, base.model.n_hidden)?;
    let batch = axis("batch_size", &spec.batch_size, base.train.batch_size)?;
    let rates = axis("learning_rate", &spec.learning_rate, learning_rate(&base.train.lr))?;
    let decays = axis("lr_decay", &spec.lr_decay.as_ref().map(|v| v.iter().map(|&d| Some(d)).collect()), base_decay)?;

    let mut cells = Vec::new();
    for &n_hidden in &hidden {
        for &batch_size in &batch {
            for &lr in &rates {
                for &decay in &decays {
                    let index = cells.len();
                    let mut config = base.clone();
                    config.name = format!("{}-cell{index:03}", base.name);
                    config.model.n_hidden = n_hidden;
                    config.train.batch_size = batch_size;
                    match &mut config.train.lr {
                        LrSchedule::ExpToZero { initial, .. } => *initial = lr,
                        LrSchedule::SmoothExp { eta0, lambda, .. } => {
                            *eta0 = lr;
                            *lambda = decay.expect("smooth_exp has a decay");
                        }
                        LrSchedule::Constant { value } => *value = lr,
                    }
                    if let SamplerConfig::AnnealerClient { record_dir: Some(d), .. } = &mut config.train.sampler {
                        *d = d.join(format!("cell{index:03}"));
                    }
                    config.validate()?;
                    cells.push(GridCell {
                        index,
                        n_hidden,
                        batch_size,
                        learning_rate: lr,
                        lr_decay: decay,
                        config,
                    });
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub cell: GridCell,
    pub run: RunResult,
}

/// Runs every cell in parallel on one shared data preparation and returns
/// the results ranked best first (cell index breaks exact ties). Each cell's
/// artifacts go to `out/cellNNN` and the ranking to `out/ranked.csv`.
pub fn run_grid(base: &ExperimentConfig, spec: &GridSpec, out: Option<&Path>) -> Result<Vec<GridResult>> {
    let cells = grid_cells(base, spec)?;
    let data = prepare(base)?;
    let mut results = cells
        .into_par_iter()
        .map(|cell| {
            let dir = out.map(|o| o.join(format!("cell{:03}", cell.index)));
            let run = run_prepared(&cell.config, &data, dir.as_deref())?;
            Ok(GridResult { cell, run })
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| rank(a, b));
    if let Some(o) = out {
        let path = o.join("ranked.csv");
        fs::write(&path, ranked_csv(&results)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(results)
}

fn rank(a: &GridResult, b: &GridResult) -> Ordering {
    a.run
        .best_report()
        .rank_cmp(b.run.best_report())
        .then(a.cell.index.cmp(&b.cell.index))
}

pub fn ranked_csv(results: &[GridResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "rank", "cell", "n_hidden", "batch_size", "learning_rate", "lr_decay", "best_epoch", "accuracy", "precision",
        "recall", "f1",
    ])
    .expect("in-memory write");
    for (k, r) in results.iter().enumerate() {
        let m = r.run.best_report();
        w.write_record([
            (k + 1).to_string(),
            r.cell.index.to_string(),
            r.cell.n_hidden.to_string(),
            r.cell.batch_size.to_string(),
            format!("{:?}", r.cell.learning_rate),
            r.cell.lr_decay.map(|d| format!("{d:?}")).unwrap_or_default(),
            r.run.outcome.best.epoch.to_string(),
            format!("{:?}", m.accuracy),
            format!("{:?}", m.precision),
            format!("{:?}", m.recall),
            format!("{:?}", m.f1),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::super::tests::small_config;
    use super::super::{run, Preset};
    use super::*;

    #[test]
    fn cells_cover_the_product() {
        let base = small_config();
        let spec = GridSpec::parse_toml("n_hidden = [2, 3]\nlearning_rate = [0.1, 0.2, 0.3]\n").unwrap();
        let cells = grid_cells(&base, &spec).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!((cells[0].n_hidden, cells[0].learning_rate), (2, 0.1));
        assert_eq!((cells[5].n_hidden, cells[5].learning_rate), (3, 0.3));
        assert!(cells.iter().all(|c| c.batch_size == base.train.batch_size));

        assert!(grid_cells(&base, &GridSpec::default()).is_err());
        assert!(grid_cells(&base, &GridSpec::parse_toml("n_hidden = []").unwrap()).is_err());
        assert!(grid_cells(&base, &GridSpec::parse_toml("lr_decay = [0.1]").unwrap()).is_err());
        assert!(GridSpec::parse_toml("width = [1]").is_err());

        let annealer = Preset::Annealer.config();
        let cells = grid_cells(&annealer, &GridSpec::parse_toml("lr_decay = [0.05, 0.2]").unwrap()).unwrap();
        assert!(matches!(cells[1].config.train.lr, LrSchedule::SmoothExp { lambda, .. } if lambda == 0.2));
    }

    #[test]
    fn single_cell_matches_plain_run() {
        let base = small_config();
        let spec = GridSpec::parse_toml("n_hidden = [4]").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let results = run_grid(&base, &spec, Some(dir.path())).unwrap();
        assert_eq!(results.len(), 1);
        let plain = run(&base, None).unwrap();
        assert_eq!(results[0].run.outcome.trace.len(), plain.outcome.trace.len());
        for (a, b) in results[0].run.outcome.trace.iter().zip(&plain.outcome.trace) {
            assert_eq!((a.epoch, a.f1, a.precision, a.lr), (b.epoch, b.f1, b.precision, b.lr));
        }
        assert_eq!(results[0].run.outcome.model, plain.outcome.model);
        let csv = fs::read_to_string(dir.path().join("ranked.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn ranking_is_a_sorted_permutation() {
        let base = small_config();
        let spec = GridSpec::parse_toml("n_hidden = [2, 6]\nlearning_rate = [0.01, 0.2]\n").unwrap();
        let results = run_grid(&base, &spec, None).unwrap();
        let mut idx: Vec<usize> = results.iter().map(|r| r.cell.index).collect();
        for w in results.windows(2) {
            assert_ne!(rank(&w[0], &w[1]), Ordering::Greater);
        }
        idx.sort_unstable();
        assert_eq!(idx, [0, 1, 2, 3]);
    }
}
