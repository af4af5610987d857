use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio between the last and first rate of [`LrSchedule::ExpToZero`].
pub const EXP_TO_ZERO_FINAL_RATIO: f64 = 1e-5;

/// Learning rate as a function of the 1-based epoch index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    /// `initial · exp(-k (t - 1))` with `k` chosen so the rate at epoch
    /// `epochs` is `initial · 1e-5`.
    ExpToZero { initial: f64, epochs: usize },
    /// `eta0 · exp(-lambda (t - 1)) + etaf`.
    SmoothExp { eta0: f64, lambda: f64, etaf: f64 },
    Constant { value: f64 },
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LrSchedule::ExpToZero { initial, epochs } => initial >= 0.0 && initial.is_finite() && epochs >= 1,
            LrSchedule::SmoothExp { eta0, lambda, etaf } => {
                eta0 >= 0.0 && lambda >= 0.0 && etaf >= 0.0 && (eta0 + etaf).is_finite() && lambda.is_finite()
            }
            LrSchedule::Constant { value } => value >= 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid learning-rate schedule {self:?}")))
        }
    }

    pub fn value(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::domain("epochs are numbered from 1"));
        }
        let steps = (t - 1) as f64;
        Ok(match *self {
            LrSchedule::ExpToZero { initial, epochs } => {
                if epochs <= 1 {
                    initial
                } else {
                    let k = -EXP_TO_ZERO_FINAL_RATIO.ln() / (epochs - 1) as f64;
                    initial * (-k * steps).exp()
                }
            }
            LrSchedule::SmoothExp { eta0, lambda, etaf } => eta0 * (-lambda * steps).exp() + etaf,
            LrSchedule::Constant { value } => value,
        })
    }
}

pub fn lr_value(schedule: &LrSchedule, t: usize) -> Result<f64> {
    schedule.value(t)
}
