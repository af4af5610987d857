//! Persistent contrastive divergence with pluggable negative phases.
//!
//! Every update ascends the log-likelihood:
//!
//! ```text
//! ΔW = lr · (E_data[v hᵀ] - E_model[v hᵀ])
//! Δb = lr · (E_data[h]    - E_model[h])
//! Δc = lr · (E_data[v]    - E_model[v])
//! ```
//!
//! The data term uses the exact conditional mean of the hidden layer; the
//! model term comes from a [`NegativePhase`].

mod negative;
mod schedule;
mod trace;

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::qubo::QuboProblem;
use crate::rbm::{Moments, RbmModel};
use crate::rng;
use crate::sampler::{estimate_moments, SampleSet};

pub use negative::{
    column_means, AnnealPhase, ClientPhase, ClientSelector, NegativePhase, PersistentChains, SamplerConfig,
};
pub use schedule::{lr_value, LrSchedule, EXP_TO_ZERO_FINAL_RATIO};
pub use trace::{parse_trace_csv, parse_trace_json, write_trace_csv, write_trace_json, EpochTrace};

/// Any parameter beyond this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

fn default_epochs() -> usize {
    50
}

fn default_gibbs_k() -> usize {
    1
}

fn default_shuffle() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    #[serde(default = "default_gibbs_k")]
    pub gibbs_k: usize,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.gibbs_k == 0 {
            return Err(Error::Config("gibbs_k must be at least 1".into()));
        }
        self.lr.validate()?;
        self.sampler.validate()
    }
}

/// Parameter-shaped gradient (or expectation difference).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub dw: Array2<f64>,
    /// Hidden biases.
    pub db: Array1<f64>,
    /// Visible biases.
    pub dc: Array1<f64>,
}

impl From<Moments> for GradientEstimate {
    fn from(m: Moments) -> Self {
        Self {
            dw: m.visible_hidden,
            db: m.hidden,
            dc: m.visible,
        }
    }
}

impl GradientEstimate {
    pub fn difference(positive: &Self, negative: &Self) -> Self {
        Self {
            dw: &positive.dw - &negative.dw,
            db: &positive.db - &negative.db,
            dc: &positive.dc - &negative.dc,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dw.iter().chain(self.db.iter()).chain(self.dc.iter()).all(|x| x.is_finite())
    }

    fn check_shape(&self, model: &RbmModel) -> Result<()> {
        if self.dw.dim() != model.weights.dim() || self.db.len() != model.n_hidden() || self.dc.len() != model.n_visible() {
            return Err(Error::contract("gradient shape does not match the model"));
        }
        Ok(())
    }
}

/// Data term: batch means of `v`, `p(h | v)` and `v p(h | v)ᵀ`.
pub fn grad_positive(model: &RbmModel, batch: ArrayView2<f64>) -> Result<GradientEstimate> {
    if batch.nrows() == 0 {
        return Err(Error::domain("empty batch"));
    }
    if batch.ncols() != model.n_visible() {
        return Err(Error::contract(format!(
            "batch has {} columns, model has {} visible units",
            batch.ncols(),
            model.n_visible()
        )));
    }
    for row in batch.rows() {
        model.check_visible(&row.to_owned())?;
    }
    Ok(grad_positive_unchecked(model, batch))
}

fn grad_positive_unchecked(model: &RbmModel, batch: ArrayView2<f64>) -> GradientEstimate {
    let m = batch.nrows() as f64;
    let probs = (batch.dot(&model.weights) + &model.hidden_bias).mapv(crate::rbm::logistic);
    GradientEstimate {
        dw: batch.t().dot(&probs) / m,
        db: probs.sum_axis(Axis(0)) / m,
        dc: batch.sum_axis(Axis(0)) / m,
    }
}

/// Model term from annealer reads in the variable space of `qubo`.
pub fn grad_negative_from_samples(model: &RbmModel, samples: &SampleSet, qubo: &QuboProblem) -> Result<GradientEstimate> {
    Ok(estimate_moments(samples, qubo, model.n_visible(), model.n_hidden())?.into())
}

/// Model term from chain states (or any list of configurations, one read each).
pub fn grad_negative_from_states(model: &RbmModel, states: &[crate::rbm::Configuration]) -> Result<GradientEstimate> {
    if states.is_empty() {
        return Err(Error::domain("no chain states"));
    }
    let mut m = Moments::zeros(model.n_visible(), model.n_hidden());
    for s in states {
        model.check_configuration(s)?;
        m.accumulate(&s.visible, &s.hidden, 1.0);
    }
    m.scale(1.0 / states.len() as f64);
    Ok(m.into())
}

/// `model += lr · step`, refusing non-finite or runaway parameters. On
/// failure the model is left untouched and the reason returned.
fn apply_step(model: &mut RbmModel, step: &GradientEstimate, lr: f64) -> std::result::Result<(), String> {
    if !step.is_finite() {
        return Err("non-finite gradient".into());
    }
    let weights = &model.weights + &(&step.dw * lr);
    let hidden_bias = &model.hidden_bias + &(&step.db * lr);
    let visible_bias = &model.visible_bias + &(&step.dc * lr);
    let worst = weights
        .iter()
        .chain(hidden_bias.iter())
        .chain(visible_bias.iter())
        .fold(0.0_f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) });
    if !worst.is_finite() {
        return Err("non-finite parameter after update".into());
    }
    if worst > DIVERGENCE_LIMIT {
        return Err(format!("parameter magnitude {worst:e} exceeds {DIVERGENCE_LIMIT:e}"));
    }
    model.weights = weights;
    model.hidden_bias = hidden_bias;
    model.visible_bias = visible_bias;
    Ok(())
}

/// Applies `lr · (positive - negative)` to the model.
pub fn apply_gradient(model: &mut RbmModel, positive: &GradientEstimate, negative: &GradientEstimate, lr: f64) -> Result<()> {
    positive.check_shape(model)?;
    negative.check_shape(model)?;
    apply_step(model, &GradientEstimate::difference(positive, negative), lr).map_err(|reason| Error::Diverged {
        epoch: 0,
        batch: 0,
        reason,
    })
}

/// One PCD update: the negative phase advances its state under the current
/// model, then the parameters move by `lr · (positive - negative)`.
pub fn pcd_update(model: &mut RbmModel, batch: ArrayView2<f64>, negative: &mut dyn NegativePhase, lr: f64) -> Result<()> {
    let positive = grad_positive(model, batch)?;
    let neg: GradientEstimate = negative.moments(model, batch)?.into();
    apply_gradient(model, &positive, &neg, lr)
}

#[derive(Clone, Debug)]
pub struct BestEpoch {
    pub epoch: usize,
    pub model: RbmModel,
    pub report: MetricsReport,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub model: RbmModel,
    pub trace: Vec<EpochTrace>,
    /// Highest-ranked epoch under [`MetricsReport::rank_cmp`], earliest on ties.
    pub best: BestEpoch,
}

/// Trains with the estimator described by `config.sampler`.
///
/// `data` holds one visible vector per row, label units included. After each
/// epoch `hook(epoch, &model)` scores the model, typically on held-out data.
pub fn train<H>(model: RbmModel, data: &Array2<f64>, config: &TrainConfig, hook: H) -> Result<TrainOutcome>
where
    H: FnMut(usize, &RbmModel) -> Result<MetricsReport>,
{
    config.validate()?;
    let mut negative = config.sampler.build(config.batch_size, config.gibbs_k, config.seed)?;
    train_with(model, data, config, negative.as_mut(), hook)
}

/// [`train`] with a caller-supplied negative phase; `config.sampler` is
/// ignored.
pub fn train_with<H>(
    mut model: RbmModel,
    data: &Array2<f64>,
    config: &TrainConfig,
    negative: &mut dyn NegativePhase,
    mut hook: H,
) -> Result<TrainOutcome>
where
    H: FnMut(usize, &RbmModel) -> Result<MetricsReport>,
{
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Config("epochs and batch_size must be at least 1".into()));
    }
    config.lr.validate()?;
    model.validate()?;
    if data.nrows() == 0 {
        return Err(Error::domain("empty training set"));
    }
    // validates every row once so the hot loop can skip it
    grad_positive(&model, data.view())?;

    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let mut shuffle_rng = rng::substream(config.seed, 0);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best: Option<BestEpoch> = None;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let lr = config.lr.value(epoch)?;
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch = data.select(Axis(0), idx);
            let positive = grad_positive_unchecked(&model, batch.view());
            let neg: GradientEstimate = negative.moments(&model, batch.view())?.into();
            apply_step(&mut model, &GradientEstimate::difference(&positive, &neg), lr).map_err(|reason| {
                Error::Diverged {
                    epoch,
                    batch: b + 1,
                    reason,
                }
            })?;
        }
        let report = hook(epoch, &model)?;
        let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        trace.push(EpochTrace::new(epoch, &report, lr, wall_time_ms));
        let better = match &best {
            None => true,
            Some(b) => report.rank_cmp(&b.report).is_lt(),
        };
        if better {
            best = Some(BestEpoch {
                epoch,
                model: model.clone(),
                report,
            });
        }
    }
    Ok(TrainOutcome {
        model,
        trace,
        best: best.expect("at least one epoch"),
    })
}
