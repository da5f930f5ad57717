//! Finite-horizon statistics for the asymptotic rate statements: scaled
//! consensus error, stopping-time gaps, the geometric-sum bound and the
//! second moment of `d(x(t)) / α(t)`.

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::optimize::OptRun;
use crate::stats::{linear_fit, mean_se};

pub const MIN_RATE_POINTS: usize = 100;
pub const MIN_MOMENT_RUNS: usize = 30;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct RateStats {
    pub beta_rate: f64,
    pub t0: usize,
    /// `series[k] = d(x(t0+k)) (t0+k)^β`.
    pub series: Vec<f64>,
    pub first_decile_mean: f64,
    pub last_decile_mean: f64,
    /// Last-decile mean over first-decile mean; `0/0` is reported as 0.
    pub ratio: f64,
    pub passed: bool,
}

pub fn consensus_rate_stats(traj: &Trajectory, beta_rate: f64) -> Result<RateStats> {
    consensus_rate_series(&traj.diameters, traj.t0, beta_rate)
}

/// As [`consensus_rate_stats`], from `d(x(t0+k))` directly.
pub fn consensus_rate_series(diameters: &[f64], t0: usize, beta_rate: f64) -> Result<RateStats> {
    if diameters.len() < MIN_RATE_POINTS {
        return Err(Error::TooShort {
            needed: MIN_RATE_POINTS,
            got: diameters.len(),
        });
    }
    if !beta_rate.is_finite() {
        return Err(Error::InvalidArgument(format!("beta_rate = {beta_rate}")));
    }
    let series: Vec<f64> = diameters
        .iter()
        .enumerate()
        .map(|(k, d)| d * ((t0 + k) as f64).powf(beta_rate))
        .collect();
    let decile = series.len() / 10;
    let first = mean(&series[..decile]);
    let last = mean(&series[series.len() - decile..]);
    let ratio = if first == 0.0 {
        if last == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        last / first
    };
    Ok(RateStats {
        beta_rate,
        t0,
        series,
        first_decile_mean: first,
        last_decile_mean: last,
        ratio,
        passed: ratio < 1.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StoppingTimeStats {
    pub lambda_threshold: f64,
    /// `t_s = inf{t > t_{s-1} : a(t) <= λ}`.
    pub times: Vec<usize>,
    /// `(t_{s+1} - t_s) t_s^{-β}`.
    pub gaps_scaled: Vec<f64>,
    pub beta: f64,
    pub first_half_max: f64,
    pub last_half_max: f64,
    pub passed: bool,
}

/// Stopping times of `a(t0), a(t0+1), ...` below `lambda` and their
/// scaled gaps. Passes when the last half of the gap sequence peaks below
/// the first half; fewer than two gaps never pass.
pub fn stopping_time_gaps(a: &[f64], t0: usize, lambda: f64, beta: f64) -> Result<StoppingTimeStats> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if a.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let times: Vec<usize> = a
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= lambda)
        .map(|(k, _)| t0 + k)
        .collect();
    if times.is_empty() {
        return Err(Error::NoCrossings(lambda));
    }
    let gaps_scaled: Vec<f64> = times
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 * (w[0] as f64).powf(-beta))
        .collect();
    let half = gaps_scaled.len() / 2;
    let max_of = |s: &[f64]| s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first_half_max = max_of(&gaps_scaled[..half]);
    let last_half_max = max_of(&gaps_scaled[half..]);
    Ok(StoppingTimeStats {
        lambda_threshold: lambda,
        times,
        beta,
        passed: gaps_scaled.len() >= 2 && last_half_max < first_half_max,
        gaps_scaled,
        first_half_max,
        last_half_max,
    })
}

/// Relative growth of the running maximum over the last quarter below
/// which [`sum_bound_check`] reports a stabilized bound.
pub const SUM_BOUND_GROWTH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct SumBound {
    pub theta: f64,
    pub t_max: usize,
    /// `max_{τ <= t} Σ_{s=τ}^{t-1} β(s) θ^{t-s} / β(t)`.
    pub m_hat: f64,
    /// Running maximum at the start of the last quarter of the range.
    pub m_three_quarters: f64,
    pub ok: bool,
}

/// Scans `t = t0..=t_max`. All summands are nonnegative, so the maximum
/// over `τ` is attained at `τ = t0` and `S(t) = θ (S(t-1) + β(t-1))`.
pub fn sum_bound_check(beta_fn: impl Fn(usize) -> f64, theta: f64, t0: usize, t_max: usize) -> Result<SumBound> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    if t_max < t0 + 4 {
        return Err(Error::TooShort {
            needed: 4,
            got: t_max.saturating_sub(t0),
        });
    }
    let quarter = t0 + 3 * (t_max - t0) / 4;
    let mut s = 0.0f64;
    let mut running = 0.0f64;
    let mut at_quarter = 0.0f64;
    for t in t0..=t_max {
        if t > t0 {
            let b = beta_fn(t - 1);
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!("beta({}) = {b}", t - 1)));
            }
            s = theta * (s + b);
        }
        running = running.max(s / beta_fn(t));
        if t == quarter {
            at_quarter = running;
        }
    }
    let ok = running.is_finite() && running <= at_quarter * (1.0 + SUM_BOUND_GROWTH_TOL);
    Ok(SumBound {
        theta,
        t_max,
        m_hat: running,
        m_three_quarters: at_quarter,
        ok,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondMoment {
    pub t0: usize,
    pub runs: usize,
    /// Cross-run mean of `d²(x(t)) / α²(t)`.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Least-squares slope of the last half, fitted on batch means.
    pub last_half_slope: f64,
    pub last_half_slope_se: f64,
    pub passed: bool,
}

/// Batches used for the last-half trend fit. The per-time means are
/// strongly autocorrelated, so the fit runs on batch means, which are
/// close to independent.
pub const MOMENT_BATCHES: usize = 20;

/// `(centre time, mean)` of up to [`MOMENT_BATCHES`] equal batches.
fn batch_means(ys: &[f64], t_first: usize) -> (Vec<f64>, Vec<f64>) {
    let size = ys.len().div_ceil(MOMENT_BATCHES).max(1);
    ys.chunks(size)
        .enumerate()
        .filter(|(_, c)| c.len() == size)
        .map(|(b, c)| {
            let centre = t_first as f64 + (b * size) as f64 + (size as f64 - 1.0) / 2.0;
            (centre, mean(c))
        })
        .unzip()
}

pub fn second_moment_ratio(runs: &[OptRun]) -> Result<SecondMoment> {
    let series: Vec<(&[f64], &[f64])> = runs
        .iter()
        .map(|r| (r.trajectory.diameters.as_slice(), r.alphas.as_slice()))
        .collect();
    let t0 = runs.first().map_or(1, OptRun::t0);
    second_moment_series(&series, t0)
}

/// As [`second_moment_ratio`], from `(d(x(t)), α(t))` series per run.
pub fn second_moment_series(runs: &[(&[f64], &[f64])], t0: usize) -> Result<SecondMoment> {
    if runs.len() < MIN_MOMENT_RUNS {
        return Err(Error::TooFewRuns {
            needed: MIN_MOMENT_RUNS,
            got: runs.len(),
        });
    }
    let len = runs[0].0.len();
    if runs.iter().any(|(d, a)| d.len() != len || a.len() != len) {
        return Err(Error::dims(format!("series of length {len}"), "mixed lengths"));
    }
    if len < 4 * MOMENT_BATCHES {
        return Err(Error::TooShort {
            needed: 4 * MOMENT_BATCHES,
            got: len,
        });
    }
    let (mean, se): (Vec<f64>, Vec<f64>) = (0..len)
        .map(|k| {
            let v: Vec<f64> = runs.iter().map(|(d, a)| (d[k] / a[k]).powi(2)).collect();
            mean_se(&v)
        })
        .unzip();
    let half = len / 2;
    let (xs, ys) = batch_means(&mean[half..], t0 + half);
    let (slope, slope_se) = match linear_fit(&xs, &ys) {
        Some(fit) => (fit.slope, fit.slope_se),
        // constant series
        None => (0.0, 0.0),
    };
    Ok(SecondMoment {
        t0,
        runs: runs.len(),
        mean,
        se,
        last_half_slope: slope,
        last_half_slope_se: slope_se,
        passed: slope <= slope_se,
    })
}
