//! End-to-end runs: load or generate a table, balance, split, encode, train
//! with per-epoch evaluation on the held-out split, and write the artifacts.
//!
//! A run directory holds:
//!
//! | file | contents |
//! |---|---|
//! | `model.json` | parameters after the last epoch |
//! | `model_best.json` | parameters at the best epoch |
//! | `trace.csv`, `trace.json` | per-epoch metrics and learning rate, no timings |
//! | `trace_timed.csv` | the same plus `wall_time_ms` |
//! | `specs.json` | preprocessing specs fitted on the train split |
//! | `metrics.json` | test metrics at the best epoch |
//! | `manifest.json` | resolved config, hashes, seeds, timings |
//!
//! Everything except the timed trace and the manifest timings is a pure
//! function of the config.

mod grid;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    correlation_filter, fit_encode, split, synth_column_config, synth_generate, transform, undersample_balance,
    write_spec_file, ColumnConfig, EncodedDataset, SpecFile, SynthParams, Table,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, metrics_json, MetricsRecord, MetricsReport};
use crate::rbm::{load_model, save_model, RbmModel, UnitKind};
use crate::rng::derive_seed;
use crate::sampler::AnnealConfig;
use crate::training::{
    train, write_trace_csv, write_trace_json, ClientSelector, LrSchedule, SamplerConfig, TrainConfig, TrainOutcome,
};

pub use grid::{grid_cells, ranked_csv, run_grid, GridCell, GridResult, GridSpec};
pub use report::{comparison_csv, comparison_table, ComparisonRow};

pub const MANIFEST_FORMAT: &str = "qrbm-run";
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Where the raw table comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Csv { path: PathBuf, columns: PathBuf },
    Synth(SynthParams),
}

fn default_true() -> bool {
    true
}

fn default_fraction() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Undersample the majority class to a 50/50 table before splitting.
    #[serde(default = "default_true")]
    pub balance: bool,
    #[serde(default)]
    pub balance_seed: u64,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    /// Drop numerical columns correlated above this; absent disables the filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_threshold: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            balance: true,
            balance_seed: 0,
            train_fraction: default_fraction(),
            split_seed: 0,
            correlation_threshold: None,
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_hidden: usize,
    /// Multiplier on the `U(-0.01, 0.01)` weight initialisation.
    #[serde(default = "default_scale")]
    pub init_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Method label used in comparison tables.
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Shipped configurations. All three train on the same synthetic table; they
/// differ in model width, batch size, schedule and negative phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Classical,
    Sa,
    Annealer,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Classical, Preset::Sa, Preset::Annealer];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Classical => "classical",
            Preset::Sa => "sa",
            Preset::Annealer => "annealer",
        }
    }

    pub fn toml(self) -> &'static str {
        match self {
            Preset::Classical => include_str!("../../presets/classical.toml"),
            Preset::Sa => include_str!("../../presets/sa.toml"),
            Preset::Annealer => include_str!("../../presets/annealer.toml"),
        }
    }

    pub fn config(self) -> ExperimentConfig {
        ExperimentConfig::parse_toml(self.toml()).expect("shipped presets parse")
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}; expected classical, sa or annealer")))
    }
}

impl ExperimentConfig {
    /// Parses and validates without touching the filesystem.
    pub fn parse_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a TOML config, or the config embedded in a run manifest when the
    /// file ends in `.json`. Relative paths resolve against the file's
    /// directory and must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            let m = parse_manifest(&text)?;
            m.config
        } else {
            Self::parse_toml(&text)?
        };
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.check_paths()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['\n', ',']) {
            return Err(Error::Config("name must be non-empty without commas or newlines".into()));
        }
        if let DataSource::Synth(p) = &self.data {
            p.validate()?;
        }
        let p = &self.pipeline;
        if !(p.train_fraction > 0.0 && p.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction must lie in (0, 1), got {}", p.train_fraction)));
        }
        if let Some(t) = p.correlation_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("correlation_threshold must lie in (0, 1], got {t}")));
            }
        }
        if self.model.n_hidden == 0 {
            return Err(Error::Config("n_hidden must be at least 1".into()));
        }
        if !(self.model.init_scale >= 0.0 && self.model.init_scale.is_finite()) {
            return Err(Error::Config("init_scale must be finite and non-negative".into()));
        }
        self.train.validate()?;
        if let LrSchedule::ExpToZero { epochs, .. } = self.train.lr {
            if epochs != self.train.epochs {
                return Err(Error::Config(format!(
                    "exp_to_zero schedule is calibrated for {epochs} epochs but training runs {}",
                    self.train.epochs
                )));
            }
        }
        Ok(())
    }

    /// Changes the epoch count, keeping an `exp_to_zero` schedule calibrated.
    pub fn set_epochs(&mut self, epochs: usize) {
        self.train.epochs = epochs;
        if let LrSchedule::ExpToZero { epochs: e, .. } = &mut self.train.lr {
            *e = epochs;
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv { path, columns } = &mut self.data {
            fix(path);
            fix(columns);
        }
        if let SamplerConfig::AnnealerClient {
            client: ClientSelector::Replay(p),
            ..
        } = &mut self.train.sampler
        {
            fix(p);
        }
    }

    /// Referenced input files must exist.
    pub fn check_paths(&self) -> Result<()> {
        let mut inputs: Vec<&Path> = Vec::new();
        if let DataSource::Csv { path, columns } = &self.data {
            inputs.extend([path.as_path(), columns.as_path()]);
        }
        if let SamplerConfig::AnnealerClient {
            client: ClientSelector::Replay(p),
            ..
        } = &self.train.sampler
        {
            inputs.push(p);
        }
        match inputs.into_iter().find(|p| !p.exists()) {
            Some(p) => Err(Error::Config(format!("{} does not exist", p.display()))),
            None => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Train and test splits, encoded with specs fitted on the train split.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    /// SHA-256 of the input CSV; absent for synthetic data.
    pub data_hash: Option<String>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedData> {
    let (table, columns, data_hash, source) = match &config.data {
        DataSource::Csv { path, columns } => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let text = String::from_utf8(bytes).map_err(|_| Error::Data(format!("{} is not UTF-8", path.display())))?;
            (
                Table::parse_csv(&text)?,
                ColumnConfig::read(columns)?,
                Some(sha256_hex(text.as_bytes())),
                path.display().to_string(),
            )
        }
        DataSource::Synth(p) => (synth_generate(p)?, synth_column_config(p), None, "synthetic".to_string()),
    };
    let p = &config.pipeline;
    let table = if p.balance {
        table.subset(&undersample_balance(&table.labels(&columns)?, p.balance_seed)?)
    } else {
        table
    };
    let parts = split(&table.labels(&columns)?, p.train_fraction, p.split_seed)?;
    let mut train = fit_encode(&table.subset(&parts.train), &columns)?;
    if let Some(t) = p.correlation_threshold {
        train = correlation_filter(&train, t)?.0;
    }
    train.provenance.source = Some(source);
    train.provenance.seed = Some(p.split_seed);
    let test = transform(&table.subset(&parts.test), &train.specs)?;
    Ok(PreparedData { train, test, data_hash })
}

/// Model initialisation seed, derived from the training seed.
pub fn init_seed(train_seed: u64) -> u64 {
    derive_seed(train_seed, 2)
}

/// Small random weights; visible biases at the data mean for Gaussian units
/// and the log-odds of the data mean for binary units.
pub fn initial_model(config: &ExperimentConfig, train: &EncodedDataset) -> Result<RbmModel> {
    let kinds = train.unit_kinds();
    let data = train.visible_matrix();
    let means = crate::training::column_means(data.view());
    let bias: Vec<f64> = kinds
        .iter()
        .zip(means.iter())
        .map(|(k, &m)| match k {
            UnitKind::Gaussian => m,
            UnitKind::Bernoulli => {
                let p = m.clamp(1e-3, 1.0 - 1e-3);
                (p / (1.0 - p)).ln()
            }
        })
        .collect();
    RbmModel::init_random(
        kinds,
        config.model.n_hidden,
        Some(train.label_block()),
        Some(&bias),
        config.model.init_scale,
        init_seed(config.train.seed),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: Option<u64>,
    pub balance: u64,
    pub split: u64,
    pub train: u64,
    pub init: u64,
    pub anneal: Option<u64>,
}

/// Everything needed to reproduce and summarise a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub data_hash: Option<String>,
    pub seeds: Seeds,
    pub sampler: String,
    pub anneal: Option<AnnealConfig>,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub best_epoch: usize,
    pub best: MetricsRecord,
    pub epoch_wall_ms: Vec<f64>,
    pub total_wall_ms: f64,
}

pub fn parse_manifest(text: &str) -> Result<RunManifest> {
    let m: RunManifest = serde_json::from_str(text)?;
    if m.format != MANIFEST_FORMAT || m.version != MANIFEST_FORMAT_VERSION {
        return Err(Error::Data(format!(
            "expected {MANIFEST_FORMAT} version {MANIFEST_FORMAT_VERSION}, got {} version {}",
            m.format, m.version
        )));
    }
    m.config.validate()?;
    if m.config.hash() != m.config_hash {
        return Err(Error::Integrity("manifest config_hash does not match its config".into()));
    }
    m.best.to_report()?;
    Ok(m)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    parse_manifest(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub manifest: RunManifest,
    pub outcome: TrainOutcome,
    pub specs: SpecFile,
}

impl RunResult {
    pub fn best_report(&self) -> &MetricsReport {
        &self.outcome.best.report
    }
}

/// Prepares the data, trains, and writes artifacts into `out` when given.
pub fn run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunResult> {
    config.validate()?;
    let data = prepare(config)?;
    run_prepared(config, &data, out)
}

/// [`run`] on already prepared data. The config's data and pipeline sections
/// are only recorded, not applied.
pub fn run_prepared(config: &ExperimentConfig, data: &PreparedData, out: Option<&Path>) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let model = initial_model(config, &data.train)?;
    let n_visible = model.n_visible();
    let visible = data.train.visible_matrix();
    let outcome = train(model, &visible, &config.train, |_, m| {
        evaluate(m, &data.test.features, &data.test.labels)
    })?;
    let total_wall_ms = started.elapsed().as_secs_f64() * 1e3;

    let manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_FORMAT_VERSION,
        name: config.name.clone(),
        config: config.clone(),
        config_hash: config.hash(),
        data_hash: data.data_hash.clone(),
        seeds: Seeds {
            data: match &config.data {
                DataSource::Synth(p) => Some(p.seed),
                DataSource::Csv { .. } => None,
            },
            balance: config.pipeline.balance_seed,
            split: config.pipeline.split_seed,
            train: config.train.seed,
            init: init_seed(config.train.seed),
            anneal: config.train.sampler.anneal().map(|a| a.seed),
        },
        sampler: config.train.sampler.name().into(),
        anneal: config.train.sampler.anneal().cloned(),
        n_visible,
        n_hidden: config.model.n_hidden,
        n_train: data.train.n_rows(),
        n_test: data.test.n_rows(),
        best_epoch: outcome.best.epoch,
        best: MetricsRecord::new(&outcome.best.report, Some(outcome.best.epoch)),
        epoch_wall_ms: outcome.trace.iter().map(|t| t.wall_time_ms.unwrap_or(0.0)).collect(),
        total_wall_ms,
    };
    let result = RunResult {
        manifest,
        specs: SpecFile::from_dataset(&data.train),
        outcome,
    };
    if let Some(dir) = out {
        write_artifacts(&result, dir)?;
    }
    Ok(result)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_artifacts(result: &RunResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trace = &result.outcome.trace;
    save_model(&result.outcome.model, &dir.join("model.json"))?;
    save_model(&result.outcome.best.model, &dir.join("model_best.json"))?;
    write_file(&dir.join("trace.csv"), &write_trace_csv(trace, false))?;
    write_file(&dir.join("trace.json"), &(write_trace_json(trace, false) + "\n"))?;
    write_file(&dir.join("trace_timed.csv"), &write_trace_csv(trace, true))?;
    write_spec_file(&result.specs, &dir.join("specs.json"))?;
    write_file(
        &dir.join("metrics.json"),
        &(metrics_json(&result.outcome.best.report, Some(result.outcome.best.epoch)) + "\n"),
    )?;
    let manifest = serde_json::to_string_pretty(&result.manifest)?;
    write_file(&dir.join("manifest.json"), &(manifest + "\n"))
}

/// Applies saved specs to a raw CSV and evaluates a saved model on it.
pub fn evaluate_files(model: &Path, csv: &Path, specs: &Path) -> Result<MetricsReport> {
    let model = load_model(model)?;
    let specs = crate::data::read_spec_file(specs)?;
    let table = Table::read_csv(csv)?;
    let data = transform(&table, &specs.columns)?;
    let expected = data.n_features() + 2;
    if model.n_visible() != expected {
        return Err(Error::contract(format!(
            "model has {} visible units but the specs encode {} features plus a 2-unit label block",
            model.n_visible(),
            data.n_features()
        )));
    }
    evaluate(&model, &data.features, &data.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::parse_trace_csv;

    pub(super) fn small_config() -> ExperimentConfig {
        let mut cfg = Preset::Classical.config();
        if let DataSource::Synth(p) = &mut cfg.data {
            p.n_rows = 300;
            p.n_numeric = 3;
            p.n_categorical = 1;
        }
        cfg.model.n_hidden = 4;
        cfg.train.batch_size = 32;
        cfg.set_epochs(3);
        cfg
    }

    #[test]
    fn presets_parse_and_round_trip() {
        for p in Preset::ALL {
            let cfg = p.config();
            assert_eq!(ExperimentConfig::parse_toml(&cfg.to_toml()).unwrap(), cfg);
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!(Preset::Sa.config().train.sampler.name(), "simulated-anneal");
        assert_eq!(Preset::Annealer.config().train.sampler.name(), "annealer-client");
        assert!("quantum".parse::<Preset>().is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = small_config();
        cfg.train.epochs = 7;
        assert!(cfg.validate().is_err(), "uncalibrated exp_to_zero");
        cfg.set_epochs(7);
        cfg.validate().unwrap();
        cfg.pipeline.train_fraction = 1.0;
        assert!(cfg.validate().is_err());

        let text = small_config().to_toml().replace("n_hidden = 4", "n_hidden = 4\nwidth = 3");
        assert!(ExperimentConfig::parse_toml(&text).is_err());
    }

    #[test]
    fn load_resolves_and_checks_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config();
        cfg.data = DataSource::Csv {
            path: "tx.csv".into(),
            columns: "cols.toml".into(),
        };
        let path = dir.path().join("exp.toml");
        fs::write(&path, cfg.to_toml()).unwrap();
        assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config(_))));

        let p = SynthParams {
            n_rows: 200,
            n_numeric: 2,
            n_categorical: 1,
            n_categories: 3,
            class_sep: 2.0,
            fraud_rate: 0.3,
            seed: 5,
        };
        synth_generate(&p).unwrap().write_csv(&dir.path().join("tx.csv")).unwrap();
        fs::write(dir.path().join("cols.toml"), synth_column_config(&p).to_toml()).unwrap();
        let loaded = ExperimentConfig::load(&path).unwrap();
        let DataSource::Csv { path: csv, .. } = &loaded.data else { panic!() };
        assert!(csv.is_absolute() || csv.starts_with(dir.path()));

        let r = run(&loaded, None).unwrap();
        assert!(r.manifest.data_hash.is_some());
        assert_eq!(r.manifest.n_train + r.manifest.n_test, 2 * 60);
    }

    #[test]
    fn run_writes_reloadable_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let r = run(&cfg, Some(dir.path())).unwrap();
        let d = dir.path();

        let trace = parse_trace_csv(&fs::read_to_string(d.join("trace.csv")).unwrap()).unwrap();
        assert_eq!(trace.len(), 3);
        assert!(trace.iter().all(|t| t.wall_time_ms.is_none()));
        let timed = parse_trace_csv(&fs::read_to_string(d.join("trace_timed.csv")).unwrap()).unwrap();
        assert!(timed.iter().all(|t| t.wall_time_ms.is_some()));
        crate::training::parse_trace_json(&fs::read_to_string(d.join("trace.json")).unwrap()).unwrap();

        assert_eq!(load_model(&d.join("model.json")).unwrap(), r.outcome.model);
        assert_eq!(load_model(&d.join("model_best.json")).unwrap(), r.outcome.best.model);
        assert_eq!(crate::data::read_spec_file(&d.join("specs.json")).unwrap(), r.specs);
        let m = crate::metrics::parse_metrics_json(&fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
        assert_eq!(m.epoch, Some(r.manifest.best_epoch));
        let manifest = read_manifest(&d.join("manifest.json")).unwrap();
        assert_eq!(manifest, r.manifest);
        assert_eq!(manifest.sampler, "pcd-gibbs");
        assert_eq!(manifest.anneal, None);
    }

    #[test]
    fn manifest_reproduces_run() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        run(&small_config(), Some(&a)).unwrap();
        let cfg = ExperimentConfig::load(&a.join("manifest.json")).unwrap();
        let b = dir.path().join("b");
        run(&cfg, Some(&b)).unwrap();
        for f in ["trace.csv", "trace.json", "model.json", "model_best.json", "specs.json", "metrics.json"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn tampered_manifest_is_rejected() {
        let r = run(&small_config(), None).unwrap();
        let text = serde_json::to_string(&r.manifest).unwrap();
        parse_manifest(&text).unwrap();
        assert!(matches!(
            parse_manifest(&text.replace("\"n_hidden\":4", "\"n_hidden\":5")),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn eval_checks_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let r = run(&cfg, Some(dir.path())).unwrap();
        let DataSource::Synth(p) = &cfg.data else { panic!() };
        let csv = dir.path().join("fresh.csv");
        synth_generate(&SynthParams { seed: 99, ..p.clone() }).unwrap().write_csv(&csv).unwrap();
        let rep = evaluate_files(&dir.path().join("model_best.json"), &csv, &dir.path().join("specs.json")).unwrap();
        assert_eq!(rep.confusion.total(), 300);
        assert!(r.best_report().f1 > 0.0);

        let other = RbmModel::init_random(vec![UnitKind::Bernoulli; 5], 2, None, None, 1.0, 0).unwrap();
        save_model(&other, &dir.path().join("other.json")).unwrap();
        assert!(matches!(
            evaluate_files(&dir.path().join("other.json"), &csv, &dir.path().join("specs.json")),
            Err(Error::Contract(_))
        ));
        fs::write(dir.path().join("empty.csv"), "").unwrap();
        assert!(evaluate_files(&dir.path().join("model.json"), &dir.path().join("empty.csv"), &dir.path().join("specs.json")).is_err());
    }
}
