//! The restricted Boltzmann machine and its Gaussian-visible variant.
//!
//! Energy of a joint configuration:
//!
//! ```text
//! E(v, h) = - Σ_ij v_i W_ij h_j - Σ_{i Bernoulli} c_i v_i + Σ_{i Gaussian} (v_i - c_i)² / 2 - Σ_j b_j h_j
//! ```
//!
//! Units are encoded as {0, 1}. The spin representation lives only in [`crate::qubo`].

mod exact;
mod io;

use std::ops::Range;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exact::{
    exact_log_likelihood, joint_prob_exact, log_partition_exact, partition_exact, ExactDistribution,
    GaussianGrid, ENUMERATION_CAP_UNITS,
};
pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT, MODEL_FORMAT_VERSION};

/// Kind of a visible unit. Hidden units are always Bernoulli.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Bernoulli,
    Gaussian,
}

/// Contiguous span of Bernoulli visible units holding a one-hot class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelBlock {
    pub start: usize,
    pub len: usize,
}

impl LabelBlock {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbmModel {
    /// `n_visible × n_hidden`.
    pub weights: Array2<f64>,
    /// `c`, one per visible unit.
    pub visible_bias: Array1<f64>,
    /// `b`, one per hidden unit.
    pub hidden_bias: Array1<f64>,
    pub kinds: Vec<UnitKind>,
    pub label_block: Option<LabelBlock>,
}

/// A joint state `(v, h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub visible: Array1<f64>,
    pub hidden: Array1<f64>,
}

impl Configuration {
    pub fn new(visible: Vec<f64>, hidden: Vec<f64>) -> Self {
        Self {
            visible: Array1::from(visible),
            hidden: Array1::from(hidden),
        }
    }
}

/// Expectations `E[v]`, `E[h]` and `E[v hᵀ]` under some distribution over
/// configurations (data, chains, annealer reads or exact enumeration).
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub visible: Array1<f64>,
    pub hidden: Array1<f64>,
    /// `n_visible × n_hidden`.
    pub visible_hidden: Array2<f64>,
}

impl Moments {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            visible: Array1::zeros(n_visible),
            hidden: Array1::zeros(n_hidden),
            visible_hidden: Array2::zeros((n_visible, n_hidden)),
        }
    }

    /// Adds `weight · (v, h, v hᵀ)`.
    pub fn accumulate(&mut self, v: &Array1<f64>, h: &Array1<f64>, weight: f64) {
        self.visible.scaled_add(weight, v);
        self.hidden.scaled_add(weight, h);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let mut row = self.visible_hidden.row_mut(i);
            row.scaled_add(weight * vi, h);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.visible *= factor;
        self.hidden *= factor;
        self.visible_hidden *= factor;
    }
}

/// Conditional distribution of one visible unit given the hidden layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VisibleConditional {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, variance: f64 },
}

impl VisibleConditional {
    pub fn mean(&self) -> f64 {
        match *self {
            VisibleConditional::Bernoulli { p } => p,
            VisibleConditional::Gaussian { mean, .. } => mean,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl RbmModel {
    /// All-zero parameters with the given unit kinds.
    pub fn zeros(kinds: Vec<UnitKind>, n_hidden: usize, label_block: Option<LabelBlock>) -> Result<Self> {
        let n_visible = kinds.len();
        let model = Self {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            kinds,
            label_block,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn bernoulli(n_visible: usize, n_hidden: usize) -> Self {
        Self::zeros(vec![UnitKind::Bernoulli; n_visible], n_hidden, None)
            .expect("an all-Bernoulli model without label block is always valid")
    }

    /// Builds a model from explicit parameters and validates it.
    pub fn from_parts(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
        kinds: Vec<UnitKind>,
        label_block: Option<LabelBlock>,
    ) -> Result<Self> {
        let model = Self {
            weights,
            visible_bias,
            hidden_bias,
            kinds,
            label_block,
        };
        model.validate()?;
        Ok(model)
    }

    /// Standard initialisation: `W ~ U(-0.01, 0.01)·scale`, `b = 0`, `c = visible_means`.
    pub fn init_random(
        kinds: Vec<UnitKind>,
        n_hidden: usize,
        label_block: Option<LabelBlock>,
        visible_means: Option<&[f64]>,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::zeros(kinds, n_hidden, label_block)?;
        let mut rng = crate::rng::seeded(seed);
        model
            .weights
            .mapv_inplace(|_| rng.random_range(-0.01..0.01) * scale);
        if let Some(means) = visible_means {
            if means.len() != model.n_visible() {
                return Err(Error::contract(format!(
                    "visible means have length {}, model has {} visible units",
                    means.len(),
                    model.n_visible()
                )));
            }
            model.visible_bias = Array1::from(means.to_vec());
        }
        model.validate()?;
        Ok(model)
    }

    pub fn n_visible(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn n_gaussian(&self) -> usize {
        self.kinds.iter().filter(|k| **k == UnitKind::Gaussian).count()
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.kinds.len();
        let nh = self.hidden_bias.len();
        if self.weights.dim() != (nv, nh) {
            return Err(Error::contract(format!(
                "weights are {:?}, expected ({nv}, {nh})",
                self.weights.dim()
            )));
        }
        if self.visible_bias.len() != nv {
            return Err(Error::contract(format!(
                "visible bias has length {}, expected {nv}",
                self.visible_bias.len()
            )));
        }
        if let Some(block) = self.label_block {
            if block.len < 2 {
                return Err(Error::contract("label block needs at least two units"));
            }
            if block.start.checked_add(block.len).is_none_or(|end| end > nv) {
                return Err(Error::contract("label block extends past the visible layer"));
            }
            if self.kinds[block.range()].iter().any(|k| *k != UnitKind::Bernoulli) {
                return Err(Error::contract("label block must be entirely Bernoulli"));
            }
        }
        self.check_finite()
    }

    pub fn check_finite(&self) -> Result<()> {
        let finite = self.weights.iter().all(|x| x.is_finite())
            && self.visible_bias.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::domain("model parameters contain NaN or infinity"))
        }
    }

    pub fn max_abs_parameter(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.visible_bias.iter())
            .chain(self.hidden_bias.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub(crate) fn check_visible(&self, v: &Array1<f64>) -> Result<()> {
        if v.len() != self.n_visible() {
            return Err(Error::contract(format!(
                "visible vector has length {}, model has {}",
                v.len(),
                self.n_visible()
            )));
        }
        for (i, (x, kind)) in v.iter().zip(&self.kinds).enumerate() {
            match kind {
                UnitKind::Bernoulli if *x != 0.0 && *x != 1.0 => {
                    return Err(Error::domain(format!("Bernoulli visible unit {i} has value {x}")));
                }
                UnitKind::Gaussian if !x.is_finite() => {
                    return Err(Error::domain(format!("Gaussian visible unit {i} is not finite")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn check_hidden(&self, h: &Array1<f64>) -> Result<()> {
        if h.len() != self.n_hidden() {
            return Err(Error::contract(format!(
                "hidden vector has length {}, model has {}",
                h.len(),
                self.n_hidden()
            )));
        }
        if let Some(j) = h.iter().position(|x| *x != 0.0 && *x != 1.0) {
            return Err(Error::domain(format!("hidden unit {j} has value {}", h[j])));
        }
        Ok(())
    }

    pub fn check_configuration(&self, cfg: &Configuration) -> Result<()> {
        self.check_visible(&cfg.visible)?;
        self.check_hidden(&cfg.hidden)
    }

    /// Visible-only part of the energy (bias and Gaussian self-terms).
    fn visible_energy(&self, v: &Array1<f64>) -> f64 {
        self.kinds
            .iter()
            .zip(v.iter().zip(self.visible_bias.iter()))
            .map(|(kind, (&x, &c))| match kind {
                UnitKind::Bernoulli => -c * x,
                UnitKind::Gaussian => 0.5 * (x - c) * (x - c),
            })
            .sum()
    }

    pub(crate) fn energy_unchecked(&self, v: &Array1<f64>, h: &Array1<f64>) -> f64 {
        let coupling = v.dot(&self.weights.dot(h));
        self.visible_energy(v) - coupling - self.hidden_bias.dot(h)
    }

    pub fn energy(&self, cfg: &Configuration) -> Result<f64> {
        self.check_configuration(cfg)?;
        Ok(self.energy_unchecked(&cfg.visible, &cfg.hidden))
    }

    /// Hidden pre-activations `b + Wᵀv`.
    pub(crate) fn hidden_input(&self, v: &Array1<f64>) -> Array1<f64> {
        v.dot(&self.weights) + &self.hidden_bias
    }

    /// Visible pre-activations `c + W h`.
    pub(crate) fn visible_input(&self, h: &Array1<f64>) -> Array1<f64> {
        self.weights.dot(h) + &self.visible_bias
    }

    pub(crate) fn cond_hidden_unchecked(&self, v: &Array1<f64>) -> Array1<f64> {
        self.hidden_input(v).mapv(logistic)
    }

    /// `p(h_j = 1 | v)` for every hidden unit.
    pub fn cond_hidden(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_visible(v)?;
        Ok(self.cond_hidden_unchecked(v))
    }

    /// Per-unit conditional of the visible layer: a Bernoulli probability or a
    /// unit-variance Gaussian with mean `c_i + Σ_j W_ij h_j`.
    pub fn cond_visible(&self, h: &Array1<f64>) -> Result<Vec<VisibleConditional>> {
        self.check_hidden(h)?;
        let input = self.visible_input(h);
        Ok(self
            .kinds
            .iter()
            .zip(input.iter())
            .map(|(kind, &a)| match kind {
                UnitKind::Bernoulli => VisibleConditional::Bernoulli { p: logistic(a) },
                UnitKind::Gaussian => VisibleConditional::Gaussian {
                    mean: a,
                    variance: 1.0,
                },
            })
            .collect())
    }

    pub(crate) fn sample_hidden<R: Rng + ?Sized>(&self, v: &Array1<f64>, rng: &mut R) -> Array1<f64> {
        self.cond_hidden_unchecked(v)
            .mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
    }

    pub(crate) fn sample_visible<R: Rng + ?Sized>(&self, h: &Array1<f64>, rng: &mut R) -> Array1<f64> {
        let input = self.visible_input(h);
        Array1::from_iter(self.kinds.iter().zip(input.iter()).map(|(kind, &a)| match kind {
            UnitKind::Bernoulli => {
                if rng.random::<f64>() < logistic(a) {
                    1.0
                } else {
                    0.0
                }
            }
            UnitKind::Gaussian => a + rng.sample::<f64, _>(StandardNormal),
        }))
    }

    /// One block-Gibbs sweep: `h' ~ p(h | v)` then `v' ~ p(v | h')`.
    ///
    /// Draw order is fixed: one uniform per hidden unit, then one uniform
    /// (Bernoulli) or one standard normal (Gaussian) per visible unit.
    pub fn gibbs_step<R: Rng + ?Sized>(&self, cfg: &Configuration, rng: &mut R) -> Result<Configuration> {
        self.check_configuration(cfg)?;
        Ok(self.gibbs_step_unchecked(&cfg.visible, rng))
    }

    pub(crate) fn gibbs_step_unchecked<R: Rng + ?Sized>(&self, v: &Array1<f64>, rng: &mut R) -> Configuration {
        let hidden = self.sample_hidden(v, rng);
        let visible = self.sample_visible(&hidden, rng);
        Configuration { visible, hidden }
    }

    pub(crate) fn free_energy_unchecked(&self, v: &Array1<f64>) -> f64 {
        self.visible_energy(v) - self.hidden_input(v).iter().map(|&x| softplus(x)).sum::<f64>()
    }

    /// `F(v) = -log Σ_h exp(-E(v, h))`, in closed form over the hidden layer.
    pub fn free_energy(&self, v: &Array1<f64>) -> Result<f64> {
        self.check_visible(v)?;
        Ok(self.free_energy_unchecked(v))
    }
}
