//! Negative-phase estimators: where the model expectations of each update
//! come from.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{qubo_to_ising, rbm_to_qubo, BinaryExpansion, ExpansionPlan, QuboProblem};
use crate::rbm::{Configuration, Moments, RbmModel};
use crate::rng::{self, derive_seed};
use crate::sampler::{
    estimate_moments, simulated_anneal, AnnealConfig, AnnealerClient, MockAnnealer, RecordingAnnealer,
    ReplayAnnealer, SampleSet,
};

/// Supplies `E_model[v]`, `E_model[h]` and `E_model[v hᵀ]` for one update.
pub trait NegativePhase {
    fn name(&self) -> &str;

    /// Called once per mini-batch with the model before the update. `batch`
    /// is only used by estimators that seed their state from data.
    fn moments(&mut self, model: &RbmModel, batch: ArrayView2<f64>) -> Result<Moments>;
}

/// Fantasy particles carried across updates and advanced by block Gibbs.
///
/// Chains are seeded from the rows of the first batch they see and are never
/// reset to data afterwards.
#[derive(Clone, Debug)]
pub struct PersistentChains {
    pub states: Vec<Configuration>,
    count: usize,
    gibbs_k: usize,
    rng: rng::Rng,
}

impl PersistentChains {
    pub fn new(count: usize, gibbs_k: usize, seed: u64) -> Result<Self> {
        if count == 0 || gibbs_k == 0 {
            return Err(Error::Config("persistent chains need count >= 1 and gibbs_k >= 1".into()));
        }
        Ok(Self {
            states: Vec::new(),
            count,
            gibbs_k,
            rng: rng::seeded(seed),
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn initialise(&mut self, model: &RbmModel, batch: ArrayView2<f64>) -> Result<()> {
        if batch.nrows() == 0 {
            return Err(Error::domain("cannot seed chains from an empty batch"));
        }
        self.states = (0..self.count)
            .map(|k| {
                let v = batch.row(k % batch.nrows()).to_owned();
                let h = model.cond_hidden(&v)?.mapv(|p| if p >= 0.5 { 1.0 } else { 0.0 });
                Ok(Configuration { visible: v, hidden: h })
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Advances every chain `gibbs_k` block-Gibbs steps under `model`.
    pub fn advance(&mut self, model: &RbmModel) {
        for state in &mut self.states {
            for _ in 0..self.gibbs_k {
                *state = model.gibbs_step_unchecked(&state.visible, &mut self.rng);
            }
        }
    }

    /// Chain statistics with the hidden layer replaced by its conditional
    /// mean, which has the same expectation and lower variance.
    pub fn chain_moments(&self, model: &RbmModel) -> Moments {
        let mut m = Moments::zeros(model.n_visible(), model.n_hidden());
        for s in &self.states {
            m.accumulate(&s.visible, &model.cond_hidden_unchecked(&s.visible), 1.0);
        }
        m.scale(1.0 / self.states.len() as f64);
        m
    }
}

impl NegativePhase for PersistentChains {
    fn name(&self) -> &str {
        "pcd-gibbs"
    }

    fn moments(&mut self, model: &RbmModel, batch: ArrayView2<f64>) -> Result<Moments> {
        if self.states.is_empty() {
            self.initialise(model, batch)?;
        }
        self.advance(model);
        Ok(self.chain_moments(model))
    }
}

fn sample_moments(model: &RbmModel, qubo: &QuboProblem, samples: &SampleSet) -> Result<Moments> {
    estimate_moments(samples, qubo, model.n_visible(), model.n_hidden())
}

/// Compiles the current model to Ising form for every mini-batch and reads
/// it with [`simulated_anneal`]. Call `k` uses the seed derived from
/// `(anneal.seed, k)`.
#[derive(Clone, Debug)]
pub struct AnnealPhase {
    anneal: AnnealConfig,
    plan: ExpansionPlan,
    calls: u64,
}

impl AnnealPhase {
    pub fn new(anneal: AnnealConfig, expansion: BinaryExpansion) -> Result<Self> {
        anneal.validate()?;
        expansion.validate()?;
        Ok(Self {
            anneal,
            plan: ExpansionPlan::uniform(expansion),
            calls: 0,
        })
    }
}

impl NegativePhase for AnnealPhase {
    fn name(&self) -> &str {
        "simulated-anneal"
    }

    fn moments(&mut self, model: &RbmModel, _batch: ArrayView2<f64>) -> Result<Moments> {
        let qubo = rbm_to_qubo(model, &self.plan)?;
        let cfg = AnnealConfig {
            seed: derive_seed(self.anneal.seed, self.calls),
            ..self.anneal.clone()
        };
        self.calls += 1;
        let samples = simulated_anneal(&qubo_to_ising(&qubo), &cfg)?;
        sample_moments(model, &qubo, &samples)
    }
}

/// Submits the compiled model to an [`AnnealerClient`], `num_reads` reads
/// per mini-batch.
pub struct ClientPhase {
    client: Box<dyn AnnealerClient>,
    num_reads: usize,
    plan: ExpansionPlan,
}

impl ClientPhase {
    pub fn new(client: Box<dyn AnnealerClient>, num_reads: usize, expansion: BinaryExpansion) -> Result<Self> {
        if num_reads == 0 {
            return Err(Error::Config("num_reads must be at least 1".into()));
        }
        expansion.validate()?;
        Ok(Self {
            client,
            num_reads,
            plan: ExpansionPlan::uniform(expansion),
        })
    }
}

impl NegativePhase for ClientPhase {
    fn name(&self) -> &str {
        "annealer-client"
    }

    fn moments(&mut self, model: &RbmModel, _batch: ArrayView2<f64>) -> Result<Moments> {
        let qubo = rbm_to_qubo(model, &self.plan)?;
        let samples = self.client.submit(&qubo_to_ising(&qubo), self.num_reads)?;
        sample_moments(model, &qubo, &samples)
    }
}

/// Which annealer client to talk to: `mock` or `replay:<path>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClientSelector {
    Mock,
    Replay(PathBuf),
}

impl FromStr for ClientSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "mock" => Ok(ClientSelector::Mock),
            Some(("replay", path)) if !path.is_empty() => Ok(ClientSelector::Replay(PathBuf::from(path))),
            _ => Err(Error::Config(format!(
                "unknown annealer client {s:?}; expected \"mock\" or \"replay:<path>\""
            ))),
        }
    }
}

impl TryFrom<String> for ClientSelector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ClientSelector> for String {
    fn from(c: ClientSelector) -> String {
        c.to_string()
    }
}

impl fmt::Display for ClientSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientSelector::Mock => f.write_str("mock"),
            ClientSelector::Replay(p) => write!(f, "replay:{}", p.display()),
        }
    }
}

fn default_expansion() -> BinaryExpansion {
    BinaryExpansion::default_gaussian()
}

/// Serializable choice of negative-phase estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerConfig {
    PcdGibbs,
    SimulatedAnneal {
        #[serde(default)]
        anneal: AnnealConfig,
        #[serde(default = "default_expansion")]
        expansion: BinaryExpansion,
    },
    AnnealerClient {
        client: ClientSelector,
        #[serde(default)]
        anneal: AnnealConfig,
        #[serde(default = "default_expansion")]
        expansion: BinaryExpansion,
        /// Archive every returned sample set here.
        #[serde(default)]
        record_dir: Option<PathBuf>,
    },
}

impl SamplerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerConfig::PcdGibbs => "pcd-gibbs",
            SamplerConfig::SimulatedAnneal { .. } => "simulated-anneal",
            SamplerConfig::AnnealerClient { .. } => "annealer-client",
        }
    }

    pub fn anneal(&self) -> Option<&AnnealConfig> {
        match self {
            SamplerConfig::PcdGibbs => None,
            SamplerConfig::SimulatedAnneal { anneal, .. } | SamplerConfig::AnnealerClient { anneal, .. } => Some(anneal),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerConfig::PcdGibbs => Ok(()),
            SamplerConfig::SimulatedAnneal { anneal, expansion } | SamplerConfig::AnnealerClient { anneal, expansion, .. } => {
                anneal.validate()?;
                expansion.validate()
            }
        }
    }

    /// Builds the estimator. Gibbs chains get `batch_size` particles seeded
    /// from `seed`; annealing estimators use their own `anneal.seed`.
    pub fn build(&self, batch_size: usize, gibbs_k: usize, seed: u64) -> Result<Box<dyn NegativePhase>> {
        self.validate()?;
        Ok(match self {
            SamplerConfig::PcdGibbs => Box::new(PersistentChains::new(batch_size, gibbs_k, derive_seed(seed, 1))?),
            SamplerConfig::SimulatedAnneal { anneal, expansion } => Box::new(AnnealPhase::new(anneal.clone(), *expansion)?),
            SamplerConfig::AnnealerClient {
                client,
                anneal,
                expansion,
                record_dir,
            } => {
                let inner: Box<dyn AnnealerClient> = match client {
                    ClientSelector::Mock => Box::new(MockAnnealer::new(anneal.clone())?),
                    ClientSelector::Replay(path) => Box::new(ReplayAnnealer::open(path)?),
                };
                let client: Box<dyn AnnealerClient> = match record_dir {
                    Some(dir) => Box::new(RecordingAnnealer::new(inner, dir)?),
                    None => inner,
                };
                Box::new(ClientPhase::new(client, anneal.num_reads, *expansion)?)
            }
        })
    }
}

impl AnnealerClient for Box<dyn AnnealerClient> {
    fn name(&self) -> &str {
        self.as_ref().name()
    }

    fn submit(&mut self, problem: &crate::qubo::IsingProblem, num_reads: usize) -> Result<SampleSet> {
        self.as_mut().submit(problem, num_reads)
    }
}

/// Mean visible vector of a batch, used to initialise visible biases.
pub fn column_means(data: ArrayView2<f64>) -> Array1<f64> {
    data.mean_axis(ndarray::Axis(0))
        .unwrap_or_else(|| Array1::zeros(data.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::ExactDistribution;
    use ndarray::{array, Array2};

    fn small_model() -> RbmModel {
        let mut m = RbmModel::bernoulli(2, 2);
        m.weights = array![[0.6, -0.4], [0.3, 0.8]];
        m.visible_bias = array![-0.2, 0.1];
        m.hidden_bias = array![0.3, -0.5];
        m
    }

    #[test]
    fn selector_strings() {
        assert_eq!("mock".parse::<ClientSelector>().unwrap(), ClientSelector::Mock);
        assert_eq!(
            "replay:/tmp/x".parse::<ClientSelector>().unwrap(),
            ClientSelector::Replay("/tmp/x".into())
        );
        assert!("replay:".parse::<ClientSelector>().is_err());
        assert!("dwave".parse::<ClientSelector>().is_err());
        assert_eq!(ClientSelector::Replay("a/b".into()).to_string(), "replay:a/b");
    }

    #[test]
    fn sampler_config_toml() {
        let text = "kind = \"annealer-client\"\nclient = \"mock\"\n[anneal]\nnum_reads = 50\nsweeps = 200\n";
        let cfg: SamplerConfig = toml::from_str(text).unwrap();
        match &cfg {
            SamplerConfig::AnnealerClient { client, anneal, expansion, record_dir } => {
                assert_eq!(*client, ClientSelector::Mock);
                assert_eq!((anneal.num_reads, anneal.sweeps, anneal.beta_final), (50, 200, 1.0));
                assert_eq!(*expansion, BinaryExpansion::default_gaussian());
                assert!(record_dir.is_none());
            }
            other => panic!("{other:?}"),
        }
        let back: SamplerConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let gibbs: SamplerConfig = toml::from_str("kind = \"pcd-gibbs\"").unwrap();
        assert_eq!(gibbs, SamplerConfig::PcdGibbs);
        assert!(toml::from_str::<SamplerConfig>("kind = \"quantum\"").is_err());
    }

    #[test]
    fn chains_persist_between_updates() {
        let m = small_model();
        let data = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let mut chains = PersistentChains::new(4, 1, 9).unwrap();
        chains.moments(&m, data.view()).unwrap();
        let after_first = chains.states.clone();
        assert_eq!(after_first.len(), 4);

        // the second call continues from the stored states: replaying one
        // Gibbs step from them with a clone of the rng gives the same states
        let mut replay = chains.clone();
        replay.advance(&m);
        chains.moments(&m, Array2::zeros((1, 2)).view()).unwrap();
        assert_eq!(chains.states, replay.states);
        assert_ne!(chains.states, after_first);
    }

    #[test]
    fn chain_moments_approach_exact() {
        let m = small_model();
        let exact = ExactDistribution::new(&m, None).unwrap().moments();
        let mut chains = PersistentChains::new(2000, 1, 3).unwrap();
        let data = array![[0.0, 0.0]];
        let mut acc = Moments::zeros(2, 2);
        for _ in 0..20 {
            let mom = chains.moments(&m, data.view()).unwrap();
            acc.accumulate(&mom.visible, &Array1::zeros(2), 1.0);
            acc.hidden += &mom.hidden;
            acc.visible_hidden += &mom.visible_hidden;
        }
        acc.scale(1.0 / 20.0);
        for (a, b) in acc.visible.iter().chain(acc.hidden.iter()).zip(exact.visible.iter().chain(exact.hidden.iter())) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
        for (a, b) in acc.visible_hidden.iter().zip(exact.visible_hidden.iter()) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn anneal_phase_estimates_model_moments() {
        let m = small_model();
        let exact = ExactDistribution::new(&m, None).unwrap().moments();
        let anneal = AnnealConfig {
            num_reads: 20_000,
            sweeps: 50,
            seed: 5,
            ..AnnealConfig::default()
        };
        let mut phase = AnnealPhase::new(anneal.clone(), BinaryExpansion::default_gaussian()).unwrap();
        let mom = phase.moments(&m, Array2::zeros((0, 2)).view()).unwrap();
        for (a, b) in mom.visible_hidden.iter().zip(exact.visible_hidden.iter()) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
        // the mock client route is the same computation
        let cfg = SamplerConfig::AnnealerClient {
            client: ClientSelector::Mock,
            anneal: AnnealConfig {
                seed: derive_seed(5, 0),
                ..anneal
            },
            expansion: BinaryExpansion::default_gaussian(),
            record_dir: None,
        };
        let mut client = cfg.build(1, 1, 0).unwrap();
        assert_eq!(client.moments(&m, Array2::zeros((0, 2)).view()).unwrap(), mom);
    }
}
