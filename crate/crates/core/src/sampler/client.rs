//! Annealer clients: a uniform submit interface in front of whatever produces
//! the reads. Hardware adapters would implement [`AnnealerClient`]; the crate
//! ships a simulated-annealing mock, a replay client for archived runs and a
//! recorder that archives the output of any other client.

use std::fs;
use std::path::{Path, PathBuf};

use super::{read_sample_set, simulated_anneal, write_sample_set_file, AnnealConfig, SampleSet};
use crate::error::{Error, Result};
use crate::qubo::IsingProblem;
use crate::rng::derive_seed;

pub trait AnnealerClient: Send {
    /// Short identifier recorded in manifests.
    fn name(&self) -> &str;

    fn submit(&mut self, problem: &IsingProblem, num_reads: usize) -> Result<SampleSet>;
}

/// Stands in for hardware by delegating to [`simulated_anneal`].
///
/// The first submission uses `config.seed`; submission `k > 0` uses a seed
/// derived from `(config.seed, k)`.
#[derive(Clone, Debug)]
pub struct MockAnnealer {
    config: AnnealConfig,
    calls: u64,
}

impl MockAnnealer {
    pub fn new(config: AnnealConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, calls: 0 })
    }

    pub fn config(&self) -> &AnnealConfig {
        &self.config
    }
}

impl AnnealerClient for MockAnnealer {
    fn name(&self) -> &str {
        "mock"
    }

    fn submit(&mut self, problem: &IsingProblem, num_reads: usize) -> Result<SampleSet> {
        let seed = match self.calls {
            0 => self.config.seed,
            k => derive_seed(self.config.seed, k),
        };
        self.calls += 1;
        let cfg = AnnealConfig {
            num_reads,
            seed,
            ..self.config.clone()
        };
        let mut set = simulated_anneal(problem, &cfg)?;
        set.source = "mock-annealer".into();
        Ok(set)
    }
}

/// Serves archived sample sets, one per submission, after checking that each
/// was recorded for the submitted problem and that its energies agree.
///
/// The source is either a single file (served on every call) or a directory
/// whose `*.samples` files are served in file-name order.
#[derive(Clone, Debug)]
pub struct ReplayAnnealer {
    files: Vec<PathBuf>,
    cycle: bool,
    next: usize,
}

impl ReplayAnnealer {
    pub fn open(path: &Path) -> Result<Self> {
        let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
        if meta.is_file() {
            return Ok(Self {
                files: vec![path.to_path_buf()],
                cycle: true,
                next: 0,
            });
        }
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "samples"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no .samples files to replay"),
            ));
        }
        Ok(Self {
            files,
            cycle: false,
            next: 0,
        })
    }
}

impl AnnealerClient for ReplayAnnealer {
    fn name(&self) -> &str {
        "replay"
    }

    fn submit(&mut self, problem: &IsingProblem, num_reads: usize) -> Result<SampleSet> {
        let path = if self.cycle {
            &self.files[0]
        } else {
            self.files.get(self.next).ok_or_else(|| {
                Error::Integrity(format!(
                    "replay exhausted after {} recorded submissions",
                    self.files.len()
                ))
            })?
        };
        let set = read_sample_set(path)?;
        set.validate_against(problem)
            .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))?;
        if set.total_reads != num_reads as u64 {
            return Err(Error::Integrity(format!(
                "{}: recorded {} reads, {num_reads} requested",
                path.display(),
                set.total_reads
            )));
        }
        self.next += 1;
        Ok(set)
    }
}

/// Writes every sample set returned by the inner client to
/// `dir/call-NNNNNN.samples`.
pub struct RecordingAnnealer<C> {
    inner: C,
    dir: PathBuf,
    calls: usize,
}

impl<C: AnnealerClient> RecordingAnnealer<C> {
    pub fn new(inner: C, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            inner,
            dir: dir.to_path_buf(),
            calls: 0,
        })
    }
}

impl<C: AnnealerClient> AnnealerClient for RecordingAnnealer<C> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn submit(&mut self, problem: &IsingProblem, num_reads: usize) -> Result<SampleSet> {
        let set = self.inner.submit(problem, num_reads)?;
        let path = self.dir.join(format!("call-{:06}.samples", self.calls));
        write_sample_set_file(&set, &path)?;
        self.calls += 1;
        Ok(set)
    }
}
