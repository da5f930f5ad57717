//! Diminishing step sizes `α(t) = K t^{-β}` with `β ∈ (1/2, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct StepSchedule {
    #[serde(rename = "K")]
    k: f64,
    beta: f64,
    t0: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    #[serde(rename = "K")]
    k: f64,
    beta: f64,
    #[serde(default = "one")]
    t0: usize,
}

fn one() -> usize {
    1
}

impl TryFrom<RawSchedule> for StepSchedule {
    type Error = Error;
    fn try_from(r: RawSchedule) -> Result<Self> {
        make_schedule(r.k, r.beta, r.t0)
    }
}

pub fn make_schedule(k: f64, beta: f64, t0: usize) -> Result<StepSchedule> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::KNonpositive(k));
    }
    if !(beta > 0.5 && beta <= 1.0) {
        return Err(Error::BetaOutOfRange(beta));
    }
    if t0 == 0 {
        return Err(Error::InvalidSchedule("t0 must be at least 1".into()));
    }
    Ok(StepSchedule { k, beta, t0 })
}

impl StepSchedule {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn alpha(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        if self.beta == 1.0 {
            self.k / t as f64
        } else {
            self.k * (t as f64).powf(-self.beta)
        }
    }
}
