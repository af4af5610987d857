//! Samplers over Ising problems.
//!
//! Every sampler returns a [`SampleSet`] in spin space. Reads are independent
//! and seeded per `(seed, read_index)`, so the result does not depend on how
//! reads are scheduled across threads.

mod client;
mod format;
mod moments;

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qubo::{write_ising, IsingProblem};
use crate::rng;

pub use client::{AnnealerClient, MockAnnealer, RecordingAnnealer, ReplayAnnealer};
pub use format::{parse_sample_set, read_sample_set, write_sample_set, write_sample_set_file};
pub use moments::estimate_moments;

/// Tolerance for stored-vs-recomputed record energies.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

/// Largest problem [`boltzmann_exact`] will enumerate.
pub const BOLTZMANN_ENUMERATION_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub spins: Vec<i8>,
    pub read_count: u64,
    pub energy: f64,
}

/// A multiset of spin configurations with read counts and energies.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub records: Vec<SampleRecord>,
    /// Inverse temperature the reads are taken to follow.
    pub beta_effective: f64,
    pub total_reads: u64,
    pub source: String,
    /// [`problem_hash`] of the problem that produced the reads.
    pub problem_hash: String,
}

/// SHA-256 of the canonical text form of the problem.
pub fn problem_hash(p: &IsingProblem) -> String {
    let digest = Sha256::digest(write_ising(p).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl SampleSet {
    /// Aggregates reads into records, keeping first-occurrence order.
    pub fn from_reads(
        problem: &IsingProblem,
        reads: impl IntoIterator<Item = Vec<i8>>,
        beta_effective: f64,
        source: impl Into<String>,
    ) -> Self {
        let mut index: HashMap<Vec<i8>, usize> = HashMap::new();
        let mut records: Vec<SampleRecord> = Vec::new();
        let mut total = 0;
        for spins in reads {
            total += 1;
            match index.get(&spins) {
                Some(&k) => records[k].read_count += 1,
                None => {
                    index.insert(spins.clone(), records.len());
                    records.push(SampleRecord {
                        energy: problem.energy_unchecked(&spins),
                        spins,
                        read_count: 1,
                    });
                }
            }
        }
        Self {
            records,
            beta_effective,
            total_reads: total,
            source: source.into(),
            problem_hash: problem_hash(problem),
        }
    }

    pub fn n(&self) -> Option<usize> {
        self.records.first().map(|r| r.spins.len())
    }

    /// Checks the bookkeeping invariants against the problem the set claims to
    /// come from.
    pub fn validate_against(&self, problem: &IsingProblem) -> Result<()> {
        let expected = problem_hash(problem);
        if self.problem_hash != expected {
            return Err(Error::Integrity(format!(
                "sample set was recorded for problem {}, submitted problem is {expected}",
                self.problem_hash
            )));
        }
        self.validate_records(Some(problem))
    }

    pub(crate) fn validate_records(&self, problem: Option<&IsingProblem>) -> Result<()> {
        let mut sum = 0u64;
        for (k, r) in self.records.iter().enumerate() {
            if r.read_count == 0 {
                return Err(Error::Integrity(format!("record {k} has a zero read count")));
            }
            if r.spins.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::Integrity(format!("record {k} contains a non-spin value")));
            }
            if let Some(p) = problem {
                if r.spins.len() != p.n() {
                    return Err(Error::Integrity(format!(
                        "record {k} has {} spins, problem has {}",
                        r.spins.len(),
                        p.n()
                    )));
                }
                let e = p.energy_unchecked(&r.spins);
                if !((e - r.energy).abs() <= ENERGY_TOLERANCE) {
                    return Err(Error::Integrity(format!(
                        "record {k} stores energy {} but the problem gives {e}",
                        r.energy
                    )));
                }
            }
            sum = sum
                .checked_add(r.read_count)
                .ok_or_else(|| Error::Integrity("read counts overflow".into()))?;
        }
        if sum != self.total_reads {
            return Err(Error::Integrity(format!(
                "read counts sum to {sum}, header says {}",
                self.total_reads
            )));
        }
        Ok(())
    }

    /// Empirical probability of each record.
    pub fn frequencies(&self) -> impl Iterator<Item = (&SampleRecord, f64)> {
        let total = self.total_reads as f64;
        self.records.iter().map(move |r| (r, r.read_count as f64 / total))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealConfig {
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
    pub interpolation: Interpolation,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            num_reads: 100,
            sweeps: 1000,
            beta_initial: 0.1,
            beta_final: 1.0,
            interpolation: Interpolation::Linear,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 {
            return Err(Error::Config("num_reads must be at least 1".into()));
        }
        if self.sweeps == 0 {
            return Err(Error::Config("sweeps must be at least 1".into()));
        }
        if !(self.beta_initial > 0.0 && self.beta_initial <= self.beta_final && self.beta_final.is_finite()) {
            return Err(Error::Config(format!(
                "beta schedule needs 0 < beta_initial <= beta_final, got {} -> {}",
                self.beta_initial, self.beta_final
            )));
        }
        Ok(())
    }

    /// Inverse temperature used for each sweep.
    pub fn beta_schedule(&self) -> Vec<f64> {
        if self.sweeps == 1 {
            return vec![self.beta_final];
        }
        let last = (self.sweeps - 1) as f64;
        (0..self.sweeps)
            .map(|k| {
                let t = k as f64 / last;
                match self.interpolation {
                    Interpolation::Linear => self.beta_initial + (self.beta_final - self.beta_initial) * t,
                    Interpolation::Geometric => self.beta_initial * (self.beta_final / self.beta_initial).powf(t),
                }
            })
            .collect()
    }
}

/// The Boltzmann distribution `P(s) ∝ exp(-β H(s))` by enumeration.
#[derive(Clone, Debug)]
pub struct ExactBoltzmann {
    /// State `k` has `s_i = +1` iff bit `i` of `k` is set.
    pub probs: Vec<f64>,
    pub n: usize,
}

impl ExactBoltzmann {
    pub fn spins(&self, k: usize) -> Vec<i8> {
        state_spins(self.n, k)
    }

    /// Total-variation distance to the empirical distribution of a sample set.
    pub fn total_variation(&self, samples: &SampleSet) -> f64 {
        let mut empirical = vec![0.0; self.probs.len()];
        for (r, f) in samples.frequencies() {
            empirical[state_index(&r.spins)] += f;
        }
        0.5 * empirical.iter().zip(&self.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

pub fn state_spins(n: usize, k: usize) -> Vec<i8> {
    (0..n).map(|i| if (k >> i) & 1 == 1 { 1 } else { -1 }).collect()
}

pub fn state_index(spins: &[i8]) -> usize {
    spins
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == 1)
        .fold(0, |acc, (i, _)| acc | (1 << i))
}

pub fn boltzmann_exact(p: &IsingProblem, beta: f64) -> Result<ExactBoltzmann> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!("beta must be positive and finite, got {beta}")));
    }
    let n = p.n();
    if n > BOLTZMANN_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            configs: 1u128 << n.min(127),
            cap: 1u128 << BOLTZMANN_ENUMERATION_CAP,
        });
    }
    let log_w: Vec<f64> = (0..1usize << n)
        .map(|k| -beta * p.energy_unchecked(&state_spins(n, k)))
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(ExactBoltzmann {
        probs: weights.into_iter().map(|w| w / z).collect(),
        n,
    })
}

/// Adjacency list view of the couplings for single-spin updates.
struct Neighbours {
    adj: Vec<Vec<(usize, f64)>>,
}

impl Neighbours {
    fn new(p: &IsingProblem) -> Self {
        let mut adj = vec![Vec::new(); p.n()];
        for (&(i, j), &v) in &p.couplings {
            adj[i].push((j, v));
            adj[j].push((i, v));
        }
        Self { adj }
    }
}

/// One annealing run: uniform random start, then one Metropolis sweep per
/// entry of `betas`.
fn anneal_read(p: &IsingProblem, nb: &Neighbours, betas: &[f64], rng: &mut rng::Rng) -> Vec<i8> {
    let n = p.n();
    let mut s: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    // local field h_i + Σ_j J_ij s_j
    let mut field: Vec<f64> = (0..n)
        .map(|i| p.fields[i] + nb.adj[i].iter().map(|&(j, v)| v * s[j] as f64).sum::<f64>())
        .collect();
    for &beta in betas {
        for i in 0..n {
            let delta = -2.0 * s[i] as f64 * field[i];
            let accept = delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp();
            if accept {
                s[i] = -s[i];
                let change = 2.0 * s[i] as f64;
                for &(j, v) in &nb.adj[i] {
                    field[j] += v * change;
                }
            }
        }
    }
    s
}

/// Sweep-based simulated annealing with Metropolis single-spin updates.
///
/// Each of `num_reads` runs starts from uniformly random spins and performs
/// `sweeps` full sweeps while β follows the configured schedule. Reads are
/// taken to follow the Boltzmann distribution at `beta_final`.
pub fn simulated_anneal(p: &IsingProblem, cfg: &AnnealConfig) -> Result<SampleSet> {
    cfg.validate()?;
    p.validate()?;
    let betas = cfg.beta_schedule();
    let nb = Neighbours::new(p);
    let reads: Vec<Vec<i8>> = (0..cfg.num_reads as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::substream(cfg.seed, r);
            anneal_read(p, &nb, &betas, &mut rng)
        })
        .collect();
    Ok(SampleSet::from_reads(p, reads, cfg.beta_final, "simulated-anneal"))
}
