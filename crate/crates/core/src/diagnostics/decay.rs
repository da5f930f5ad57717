//! Contraction of transition products: `E[diam Φ(t, τ)]` decay fits, joint
//! window moments, and the mixing floor `E[Λ(Φ)] >= θ`.

use serde::Serialize;

use crate::chains::BoxedChain;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::stats::{linear_fit, mean_se};
use crate::stochastic::{compose, diam, mixing, StochasticMatrix};

/// Builds the chain for trial `k`.
pub trait ChainFactory: Fn(u64) -> Result<BoxedChain> + Sync + Send {}
impl<F> ChainFactory for F where F: Fn(u64) -> Result<BoxedChain> + Sync + Send {}

pub const MIN_TRIALS: usize = 30;
const FIT_START: usize = 5;
const FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct DecayEstimate {
    pub horizon: usize,
    pub trials: usize,
    /// `mean_diam[k]` estimates `E[diam Φ(k+1, 0)]`.
    pub mean_diam: Vec<f64>,
    pub se: Vec<f64>,
    pub fitted_log_slope: f64,
    pub fitted_intercept: f64,
    pub fitted_lambda: f64,
    pub r_squared: f64,
    /// Inclusive range of `t` used in the fit.
    pub fit_range: (usize, usize),
    /// Smallest `C` with `mean_diam(t) <= C λ^t` for every `t`.
    pub envelope_c: f64,
}

/// Sample path of `diam Φ(t, 0)`, `t = 1..=t_max`.
fn diam_path(mut chain: BoxedChain, t_max: usize) -> Vec<f64> {
    let mut phi = StochasticMatrix::identity(chain.n());
    (0..t_max)
        .map(|_| {
            let w = chain.next_matrix();
            phi = compose(&w, &phi).expect("chain keeps its size");
            diam(&phi)
        })
        .collect()
}

fn column_stats(paths: &[Vec<f64>], len: usize) -> (Vec<f64>, Vec<f64>) {
    (0..len)
        .map(|k| {
            let v: Vec<f64> = paths.iter().map(|p| p[k]).collect();
            mean_se(&v)
        })
        .unzip()
}

pub fn estimate_diam_decay(
    factory: impl ChainFactory,
    t_max: usize,
    trials: usize,
    exec: Execution,
) -> Result<DecayEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::TooFewRuns {
            needed: MIN_TRIALS,
            got: trials,
        });
    }
    if t_max < 10 {
        return Err(Error::TooShort {
            needed: 10,
            got: t_max,
        });
    }
    let paths = exec
        .map(trials, |k| factory(k as u64).map(|c| diam_path(c, t_max)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (mean_diam, se) = column_stats(&paths, t_max);

    if mean_diam.iter().all(|&d| d <= FIT_FLOOR) {
        return Err(Error::AllPathsDegenerate(0.0));
    }
    if mean_diam.iter().all(|&d| (d - 1.0).abs() <= FIT_FLOOR) {
        return Err(Error::AllPathsDegenerate(1.0));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = mean_diam
        .iter()
        .enumerate()
        .map(|(k, &d)| (k + 1, d))
        .filter(|&(t, d)| t >= FIT_START && d > FIT_FLOOR)
        .map(|(t, d)| (t as f64, d.ln()))
        .unzip();
    let fit = linear_fit(&xs, &ys).ok_or(Error::AllPathsDegenerate(mean_diam[t_max - 1]))?;
    let lambda = fit.slope.exp();
    let envelope_c = mean_diam
        .iter()
        .enumerate()
        .map(|(k, d)| d / lambda.powi(k as i32 + 1))
        .fold(0.0, f64::max);
    Ok(DecayEstimate {
        horizon: t_max,
        trials,
        mean_diam,
        se,
        fitted_log_slope: fit.slope,
        fitted_intercept: fit.intercept,
        fitted_lambda: lambda,
        r_squared: fit.r_squared,
        fit_range: (xs[0] as usize, *xs.last().unwrap() as usize),
        envelope_c,
    })
}

impl DecayEstimate {
    /// Constants `(C, λ)` of the two-window bound implied by this
    /// single-window fit: `C = max(C̃², C̃³)`, `λ = sqrt(λ̃)`.
    pub fn joint_constants(&self) -> (f64, f64) {
        let c = self.envelope_c;
        (c.powi(2).max(c.powi(3)), self.fitted_lambda.sqrt())
    }

    /// Whether `mean_diam(t) <= C̃ λ̃^t` holds at every `t` (true by
    /// construction of `envelope_c`, up to rounding).
    pub fn envelope_holds(&self) -> bool {
        self.mean_diam
            .iter()
            .enumerate()
            .all(|(k, d)| *d <= self.envelope_c * self.fitted_lambda.powi(k as i32 + 1) * (1.0 + 1e-12))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub tau: usize,
    pub t: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointEstimate {
    pub first: Window,
    pub second: Window,
    pub trials: usize,
    pub mean: f64,
    pub se: f64,
}

impl JointEstimate {
    /// `C λ^{t1-τ1} λ^{t2-τ2}`.
    pub fn bound(&self, c: f64, lambda: f64) -> f64 {
        c * lambda.powi((self.first.t - self.first.tau) as i32)
            * lambda.powi((self.second.t - self.second.tau) as i32)
    }

    pub fn within_bound(&self, c: f64, lambda: f64) -> bool {
        self.mean <= self.bound(c, lambda) + 3.0 * self.se
    }
}

/// Monte Carlo estimate of `E[diam Φ(t2, τ2) diam Φ(t1, τ1)]`.
pub fn joint_diam_decay(
    factory: impl ChainFactory,
    first: Window,
    second: Window,
    trials: usize,
    exec: Execution,
) -> Result<JointEstimate> {
    if first.tau > first.t || second.tau > second.t || first.tau > second.tau {
        return Err(Error::WindowOrderViolation(format!(
            "need tau1 <= t1, tau2 <= t2, tau1 <= tau2; got ({}, {}), ({}, {})",
            first.tau, first.t, second.tau, second.t
        )));
    }
    if trials < 2 {
        return Err(Error::TooFewRuns { needed: 2, got: trials });
    }
    let end = first.t.max(second.t);
    let samples = exec
        .map(trials, |k| -> Result<f64> {
            let mut chain = factory(k as u64)?;
            let n = chain.n();
            let mut p1 = StochasticMatrix::identity(n);
            let mut p2 = StochasticMatrix::identity(n);
            for s in 1..=end {
                let w = chain.next_matrix();
                if s > first.tau && s <= first.t {
                    p1 = compose(&w, &p1)?;
                }
                if s > second.tau && s <= second.t {
                    p2 = compose(&w, &p2)?;
                }
            }
            Ok(diam(&p1) * diam(&p2))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (mean, se) = mean_se(&samples);
    Ok(JointEstimate {
        first,
        second,
        trials,
        mean,
        se,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FloorEstimate {
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub gamma: f64,
    pub nu: f64,
    /// Window start index `s`; the product is `Φ((n²+s)B, sB)`.
    pub s: usize,
    pub trials: usize,
    pub mean_mixing: f64,
    pub se: f64,
    /// `ln θ = n²B ln ν + n² ln p`, `p = 1 - (1-γ)/(1-ν)`.
    pub log_theta: f64,
    pub theta: f64,
    /// `mean >= θ - 3 SE`.
    pub above_floor: bool,
    /// `mean - 3 SE > 0`.
    pub strictly_positive: bool,
}

/// `ln θ` for the mixing floor; requires `0 < ν < γ < 1`.
pub fn log_theta(n: usize, b: usize, gamma: f64, nu: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    if !(nu > 0.0 && nu < gamma) {
        return Err(Error::InvalidArgument(format!("need 0 < nu < gamma, got nu = {nu}")));
    }
    let p = 1.0 - (1.0 - gamma) / (1.0 - nu);
    let n2 = (n * n) as f64;
    Ok(n2 * b as f64 * nu.ln() + n2 * p.ln())
}

/// Monte Carlo mean of `Λ(Φ((n²+s)B, sB))` against the floor `θ`.
pub fn mixing_floor_estimate(
    factory: impl ChainFactory,
    b: usize,
    gamma: f64,
    nu: f64,
    s: usize,
    trials: usize,
    exec: Execution,
) -> Result<FloorEstimate> {
    let n = factory(0)?.n();
    let log_theta = log_theta(n, b, gamma, nu)?;
    if trials < 2 {
        return Err(Error::TooFewRuns { needed: 2, got: trials });
    }
    let start = s * b;
    let end = (n * n + s) * b;
    let samples = exec
        .map(trials, |k| -> Result<f64> {
            let mut chain = factory(k as u64)?;
            let mut phi = StochasticMatrix::identity(n);
            for step in 1..=end {
                let w = chain.next_matrix();
                if step > start {
                    phi = compose(&w, &phi)?;
                }
            }
            Ok(mixing(&phi))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (mean, se) = mean_se(&samples);
    let theta = log_theta.exp();
    Ok(FloorEstimate {
        n,
        b,
        gamma,
        nu,
        s,
        trials,
        mean_mixing: mean,
        se,
        log_theta,
        theta,
        above_floor: mean >= theta - 3.0 * se,
        strictly_positive: mean - 3.0 * se > 0.0,
    })
}
