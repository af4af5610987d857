//! Brute-force probabilistic quantities for small models. These are the
//! oracles every sampler and gradient estimator is checked against.

use ndarray::Array1;

use super::{Configuration, Moments, RbmModel, UnitKind};
use crate::error::{Error, Result};

/// Maximum number of binary units (visible Bernoulli + hidden) enumerated.
pub const ENUMERATION_CAP_UNITS: u32 = 24;
const CONFIG_CAP: u128 = 1 << ENUMERATION_CAP_UNITS;

/// Quadrature grid for Gaussian visible units.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianGrid {
    pub points: Vec<f64>,
    /// Cell width used as the quadrature weight of each point.
    pub weight: f64,
}

impl GaussianGrid {
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2 && hi > lo);
        let step = (hi - lo) / (n - 1) as f64;
        Self {
            points: (0..n).map(|k| lo + step * k as f64).collect(),
            weight: step,
        }
    }
}

impl Default for GaussianGrid {
    /// 41 points over [-5, 5].
    fn default() -> Self {
        Self::uniform(-5.0, 5.0, 41)
    }
}

/// Iterates over the full joint state space with reused buffers.
struct Enumerator<'a> {
    model: &'a RbmModel,
    grid: Option<&'a GaussianGrid>,
    /// radix per visible unit (2 or grid size)
    radix: Vec<usize>,
    total: u128,
}

impl<'a> Enumerator<'a> {
    fn new(model: &'a RbmModel, grid: Option<&'a GaussianGrid>) -> Result<Self> {
        let n_gauss = model.n_gaussian();
        if n_gauss > 0 && grid.is_none() {
            return Err(Error::contract(
                "exact enumeration of a Gaussian model requires a discretisation grid",
            ));
        }
        let grid_len = grid.map_or(0, |g| g.points.len());
        let radix: Vec<usize> = model
            .kinds
            .iter()
            .map(|k| match k {
                UnitKind::Bernoulli => 2,
                UnitKind::Gaussian => grid_len,
            })
            .collect();
        let binary_units = (model.n_visible() - n_gauss + model.n_hidden()) as u32;
        let mut total: u128 = 1;
        for r in radix.iter().copied().chain(std::iter::repeat_n(2, model.n_hidden())) {
            total = total.saturating_mul(r as u128);
        }
        if binary_units > ENUMERATION_CAP_UNITS || total > CONFIG_CAP {
            return Err(Error::EnumerationCap {
                configs: total,
                cap: CONFIG_CAP,
            });
        }
        Ok(Self {
            model,
            grid,
            radix,
            total,
        })
    }

    /// Calls `f(v, h)` for every configuration in a fixed order: the visible
    /// digits vary slowest, hidden bits fastest.
    fn for_each(&self, mut f: impl FnMut(&Array1<f64>, &Array1<f64>)) {
        let nv = self.model.n_visible();
        let nh = self.model.n_hidden();
        let mut v = Array1::zeros(nv);
        let mut h = Array1::zeros(nh);
        let mut digits = vec![0usize; nv];
        let n_visible_configs: u128 = self.radix.iter().map(|&r| r as u128).product();
        for _ in 0..n_visible_configs {
            for i in 0..nv {
                v[i] = match self.model.kinds[i] {
                    UnitKind::Bernoulli => digits[i] as f64,
                    UnitKind::Gaussian => self.grid.expect("checked in new").points[digits[i]],
                };
            }
            for hk in 0..(1u64 << nh) {
                for j in 0..nh {
                    h[j] = ((hk >> j) & 1) as f64;
                }
                f(&v, &h);
            }
            // odometer increment, unit 0 fastest
            for i in 0..nv {
                digits[i] += 1;
                if digits[i] < self.radix[i] {
                    break;
                }
                digits[i] = 0;
            }
        }
    }

    /// `log` of the quadrature weight attached to each configuration.
    fn log_cell_weight(&self) -> f64 {
        match self.grid {
            Some(g) => self.model.n_gaussian() as f64 * g.weight.ln(),
            None => 0.0,
        }
    }
}

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// `log Z`, enumerating every configuration.
pub fn log_partition_exact(model: &RbmModel, grid: Option<&GaussianGrid>) -> Result<f64> {
    model.validate()?;
    let en = Enumerator::new(model, grid)?;
    let mut acc = LogSumExp::new();
    en.for_each(|v, h| acc.add(-model.energy_unchecked(v, h)));
    Ok(acc.value() + en.log_cell_weight())
}

/// `Z = Σ_v Σ_h exp(-E(v, h))`. Gaussian units are integrated on `grid`.
pub fn partition_exact(model: &RbmModel, grid: Option<&GaussianGrid>) -> Result<f64> {
    log_partition_exact(model, grid).map(f64::exp)
}

/// `exp(-E(cfg)) / Z`; a density in the Gaussian coordinates if there are any.
pub fn joint_prob_exact(model: &RbmModel, cfg: &Configuration, grid: Option<&GaussianGrid>) -> Result<f64> {
    let energy = model.energy(cfg)?;
    let log_z = log_partition_exact(model, grid)?;
    Ok((-energy - log_z).exp())
}

/// `-Σ_i log p(v⁽ⁱ⁾)` with the hidden layer summed by enumeration.
pub fn exact_log_likelihood(model: &RbmModel, data: &[Array1<f64>], grid: Option<&GaussianGrid>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::domain("log-likelihood of an empty dataset"));
    }
    let log_z = log_partition_exact(model, grid)?;
    let nh = model.n_hidden();
    let mut h = Array1::zeros(nh);
    let mut total = 0.0;
    for v in data {
        model.check_visible(v)?;
        let mut acc = LogSumExp::new();
        for hk in 0..(1u64 << nh) {
            for j in 0..nh {
                h[j] = ((hk >> j) & 1) as f64;
            }
            acc.add(-model.energy_unchecked(v, &h));
        }
        total -= acc.value() - log_z;
    }
    Ok(total)
}

/// The whole joint distribution, materialised. Probabilities are masses
/// (density times cell volume for Gaussian units) and sum to one.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub configs: Vec<Configuration>,
    pub probs: Vec<f64>,
    pub log_partition: f64,
}

impl ExactDistribution {
    pub fn new(model: &RbmModel, grid: Option<&GaussianGrid>) -> Result<Self> {
        model.validate()?;
        let en = Enumerator::new(model, grid)?;
        let mut configs = Vec::with_capacity(en.total as usize);
        let mut log_w = Vec::with_capacity(en.total as usize);
        let mut acc = LogSumExp::new();
        en.for_each(|v, h| {
            let lw = -model.energy_unchecked(v, h);
            acc.add(lw);
            log_w.push(lw);
            configs.push(Configuration {
                visible: v.clone(),
                hidden: h.clone(),
            });
        });
        let log_norm = acc.value();
        let probs = log_w.into_iter().map(|lw| (lw - log_norm).exp()).collect();
        Ok(Self {
            configs,
            probs,
            log_partition: log_norm + en.log_cell_weight(),
        })
    }

    pub fn moments(&self) -> Moments {
        let nv = self.configs.first().map_or(0, |c| c.visible.len());
        let nh = self.configs.first().map_or(0, |c| c.hidden.len());
        let mut m = Moments::zeros(nv, nh);
        for (cfg, &p) in self.configs.iter().zip(&self.probs) {
            m.accumulate(&cfg.visible, &cfg.hidden, p);
        }
        m
    }

    pub fn index_of(&self, cfg: &Configuration) -> Option<usize> {
        self.configs.iter().position(|c| c == cfg)
    }
}
