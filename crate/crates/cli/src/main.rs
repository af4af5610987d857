use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qrbm::data::{synth_column_config, synth_generate, SynthParams};
use qrbm::experiment::{
    comparison_csv, comparison_table, evaluate_files, read_manifest, run, run_grid, ComparisonRow, DataSource,
    ExperimentConfig, GridSpec, Preset,
};
use qrbm::metrics::{metrics_json, MetricsReport};
use qrbm::qubo::{qubo_to_ising, read_ising_file, read_qubo_file, IsingProblem};
use qrbm::sampler::{
    simulated_anneal, write_sample_set, AnnealConfig, AnnealerClient, Interpolation, MockAnnealer, ReplayAnnealer,
};
use qrbm::training::{ClientSelector, LrSchedule, SamplerConfig};

/// Default parent for run directories when neither the flag nor the config
/// names one.
const OUTPUT_DIR_ENV: &str = "QRBM_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "qrbm", version, about = "RBM classifiers trained with Gibbs, annealing or annealer-client negative phases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare data, train, evaluate every epoch, write the run directory.
    Train(TrainArgs),
    /// Evaluate a saved model on a raw CSV using saved preprocessing specs.
    Eval(EvalArgs),
    /// Train every cell of a hyperparameter grid and rank them.
    Gridsearch(GridArgs),
    /// Run a sampler on an Ising or QUBO problem file.
    Sample(SampleArgs),
    /// Generate a synthetic fraud-like table.
    Synth(SynthArgs),
    /// Tabulate finished runs side by side.
    Compare(CompareArgs),
    /// Print a shipped preset config.
    Preset { name: Preset },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config, or a run manifest.json to reproduce.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// classical, sa or annealer.
    #[arg(long)]
    preset: Option<Preset>,
    /// Raw CSV to use instead of the configured data source.
    #[arg(long, requires = "columns")]
    data: Option<PathBuf>,
    /// Column-kind TOML for --data.
    #[arg(long, requires = "data")]
    columns: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    n_hidden: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate of the configured schedule.
    #[arg(long)]
    lr: Option<f64>,
    /// Training seed (shuffling, chains, initialisation).
    #[arg(long)]
    seed: Option<u64>,
    /// pcd-gibbs, simulated-anneal, mock or replay:<path>.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    num_reads: Option<usize>,
    /// Archive every annealer-client sample set here.
    #[arg(long)]
    record_dir: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(p)) => p.config(),
            (None, None) => bail!("pass --config <file> or --preset <name>"),
        };
        if let (Some(path), Some(columns)) = (&self.data, &self.columns) {
            cfg.data = DataSource::Csv {
                path: path.clone(),
                columns: columns.clone(),
            };
        }
        if let Some(n) = &self.name {
            cfg.name = n.clone();
        }
        if let Some(e) = self.epochs {
            cfg.set_epochs(e);
        }
        if let Some(h) = self.n_hidden {
            cfg.model.n_hidden = h;
        }
        if let Some(b) = self.batch_size {
            cfg.train.batch_size = b;
        }
        if let Some(lr) = self.lr {
            match &mut cfg.train.lr {
                LrSchedule::ExpToZero { initial, .. } => *initial = lr,
                LrSchedule::SmoothExp { eta0, .. } => *eta0 = lr,
                LrSchedule::Constant { value } => *value = lr,
            }
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(s) = &self.sampler {
            cfg.train.sampler = switch_sampler(&cfg.train.sampler, s)?;
        }
        match &mut cfg.train.sampler {
            SamplerConfig::PcdGibbs => {
                if self.sweeps.is_some() || self.num_reads.is_some() || self.record_dir.is_some() {
                    bail!("--sweeps, --num-reads and --record-dir need an annealing sampler");
                }
            }
            SamplerConfig::SimulatedAnneal { anneal, .. } | SamplerConfig::AnnealerClient { anneal, .. } => {
                if let Some(s) = self.sweeps {
                    anneal.sweeps = s;
                }
                if let Some(r) = self.num_reads {
                    anneal.num_reads = r;
                }
            }
        }
        if let Some(dir) = &self.record_dir {
            match &mut cfg.train.sampler {
                SamplerConfig::AnnealerClient { record_dir, .. } => *record_dir = Some(dir.clone()),
                _ => bail!("--record-dir needs an annealer-client sampler (mock or replay:<path>)"),
            }
        }
        cfg.validate()?;
        cfg.check_paths()?;
        Ok(cfg)
    }
}

/// Swaps the negative phase while keeping anneal and expansion settings.
fn switch_sampler(current: &SamplerConfig, name: &str) -> Result<SamplerConfig> {
    let (anneal, expansion) = match current {
        SamplerConfig::SimulatedAnneal { anneal, expansion } | SamplerConfig::AnnealerClient { anneal, expansion, .. } => {
            (anneal.clone(), *expansion)
        }
        SamplerConfig::PcdGibbs => (AnnealConfig::default(), qrbm::qubo::BinaryExpansion::default_gaussian()),
    };
    Ok(match name {
        "pcd-gibbs" => SamplerConfig::PcdGibbs,
        "simulated-anneal" => SamplerConfig::SimulatedAnneal { anneal, expansion },
        client => SamplerConfig::AnnealerClient {
            client: client.parse::<ClientSelector>()?,
            anneal,
            expansion,
            record_dir: None,
        },
    })
}

/// Flag, then config, then `$QRBM_OUTPUT_DIR/<name>`, then `runs/<name>`.
fn output_dir(flag: &Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| {
        let parent = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| "runs".into());
        parent.join(&cfg.name)
    })
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Raw CSV with the same columns the model was trained on.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    specs: PathBuf,
    /// Write the metrics JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the metrics JSON instead of the text summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// TOML grid spec.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Ising (`.ising`) or QUBO (`.qubo`) text file.
    problem: PathBuf,
    /// Force the problem format instead of guessing from the extension.
    #[arg(long, value_parser = ["ising", "qubo"])]
    format: Option<String>,
    /// sa, mock or replay:<path>.
    #[arg(long, default_value = "sa")]
    client: String,
    #[arg(long, default_value_t = 100)]
    num_reads: usize,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 0.1)]
    beta_initial: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_final: f64,
    #[arg(long)]
    geometric: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the sample set here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 4000)]
    rows: usize,
    #[arg(long, default_value_t = 2)]
    numeric: usize,
    #[arg(long, default_value_t = 4)]
    categorical: usize,
    #[arg(long, default_value_t = 4)]
    categories: usize,
    #[arg(long, default_value_t = 2.0)]
    class_sep: f64,
    #[arg(long, default_value_t = 0.25)]
    fraud_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the matching column-kind TOML.
    #[arg(long)]
    columns_out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories (or their manifest.json files).
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn print_report(r: &MetricsReport) {
    println!("accuracy  {:.4}", r.accuracy);
    println!("precision {:.4}", r.precision);
    println!("recall    {:.4}", r.recall);
    println!("f1        {:.4}", r.f1);
    let c = r.confusion;
    println!("confusion tp={} fp={} fn={} tn={}", c.tp, c.fp, c.fn_, c.tn);
    for m in &r.undefined {
        println!("note: {m} has a zero denominator and is reported as 0");
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = args.experiment.resolve()?;
    let dir = output_dir(&args.output_dir, &cfg);
    let r = run(&cfg, Some(&dir))?;
    let m = &r.manifest;
    println!(
        "{}: sampler {}, {} visible x {} hidden, {} train / {} test rows",
        m.name, m.sampler, m.n_visible, m.n_hidden, m.n_train, m.n_test
    );
    println!("best epoch {} of {} ({:.1}s total)", m.best_epoch, cfg.train.epochs, m.total_wall_ms / 1e3);
    print_report(r.best_report());
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let report = evaluate_files(&args.model, &args.data, &args.specs)?;
    let json = metrics_json(&report, None) + "\n";
    if args.json {
        print!("{json}");
    } else {
        print_report(&report);
    }
    if let Some(out) = &args.out {
        write(out, &json)?;
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    let cfg = args.experiment.resolve()?;
    let spec = GridSpec::read(&args.grid)?;
    let dir = output_dir(&args.output_dir, &cfg);
    let results = run_grid(&cfg, &spec, Some(&dir))?;
    println!("{:>4}  {:>4}  {:>8}  {:>5}  {:>8}  {:>6}  {:>6}", "rank", "cell", "n_hidden", "batch", "lr", "decay", "f1");
    for (k, r) in results.iter().enumerate() {
        println!(
            "{:>4}  {:>4}  {:>8}  {:>5}  {:>8}  {:>6}  {:>6.4}",
            k + 1,
            r.cell.index,
            r.cell.n_hidden,
            r.cell.batch_size,
            r.cell.learning_rate,
            r.cell.lr_decay.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
            r.run.best_report().f1
        );
    }
    println!("ranking in {}", dir.join("ranked.csv").display());
    Ok(())
}

fn load_problem(path: &Path, format: Option<&str>) -> Result<IsingProblem> {
    let format = match format {
        Some(f) => f,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("qubo") => "qubo",
            Some("ising") => "ising",
            _ => bail!("cannot tell the format of {}; pass --format ising|qubo", path.display()),
        },
    };
    Ok(match format {
        "qubo" => qubo_to_ising(&read_qubo_file(path)?),
        _ => read_ising_file(path)?,
    })
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let problem = load_problem(&args.problem, args.format.as_deref())?;
    let cfg = AnnealConfig {
        num_reads: args.num_reads,
        sweeps: args.sweeps,
        beta_initial: args.beta_initial,
        beta_final: args.beta_final,
        interpolation: if args.geometric {
            Interpolation::Geometric
        } else {
            Interpolation::Linear
        },
        seed: args.seed,
    };
    let set = match args.client.as_str() {
        "sa" => simulated_anneal(&problem, &cfg)?,
        other => match other.parse::<ClientSelector>()? {
            ClientSelector::Mock => MockAnnealer::new(cfg)?.submit(&problem, args.num_reads)?,
            ClientSelector::Replay(p) => ReplayAnnealer::open(&p)?.submit(&problem, args.num_reads)?,
        },
    };
    let text = write_sample_set(&set);
    match &args.out {
        Some(out) => write(out, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let params = SynthParams {
        n_rows: args.rows,
        n_numeric: args.numeric,
        n_categorical: args.categorical,
        n_categories: args.categories,
        class_sep: args.class_sep,
        fraud_rate: args.fraud_rate,
        seed: args.seed,
    };
    synth_generate(&params)?.write_csv(&args.out)?;
    if let Some(path) = &args.columns_out {
        write(path, &synth_column_config(&params).to_toml())?;
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let rows = args
        .runs
        .iter()
        .map(|p| {
            let path = if p.is_dir() { p.join("manifest.json") } else { p.clone() };
            read_manifest(&path).map(|m| ComparisonRow::from(&m))
        })
        .collect::<qrbm::Result<Vec<_>>>()?;
    print!("{}", comparison_table(&rows));
    if let Some(out) = &args.csv {
        write(out, &comparison_csv(&rows))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gridsearch(a) => cmd_grid(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Preset { name } => {
            print!("{}", name.toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
