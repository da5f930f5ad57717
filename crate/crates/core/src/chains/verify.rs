//! Empirical checks of the stochasticity and connectivity assumptions.
//!
//! Along independent sample paths the verifier checks that each realized
//! `W(t)` is row-stochastic with every self-loop above `gamma`. For each
//! window `tB+1..=(t+1)B` it also checks that the conditional means are
//! column-stochastic and that the union of their threshold graphs has a
//! spanning rooted tree.

use serde::{Deserialize, Serialize};

use crate::chains::ChainGenerator;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, stream_rng, Execution};
use crate::graph::{graph_of, has_spanning_rooted_tree, union_graphs};
use crate::stochastic::{StochasticMatrix, EXACT_TOL};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// `E[W(τ) | F(tB)]` for every `τ` in the window.
    #[default]
    WindowStart,
    /// `E[W(τ) | F(τ-1)]` along the realized path, the per-step sufficient form.
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSource {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOptions {
    #[serde(rename = "B")]
    pub b: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub trials: usize,
    pub conditioning: Conditioning,
    /// Resamples per conditional law when no closed form exists.
    pub resamples: usize,
    pub exec: Execution,
    pub seed: u64,
}

impl VerifyOptions {
    pub fn new(b: usize, gamma: f64, horizon: usize, trials: usize) -> Self {
        Self {
            b,
            gamma,
            horizon,
            trials,
            conditioning: Conditioning::WindowStart,
            resamples: 200,
            exec: Execution::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub row_stochastic_ok: bool,
    pub self_loops_ok: bool,
    /// Largest `|Σ_i E[w_ij] - 1|` seen over all checked conditional means.
    pub cond_column_sums_max_dev: f64,
    pub column_sums_ok: bool,
    pub b_connectivity_ok: bool,
    pub windows_checked: usize,
    pub windows_failed: usize,
    #[serde(rename = "B_used")]
    pub b_used: usize,
    pub gamma_used: f64,
    pub trials: usize,
    pub horizon: usize,
    pub source: LawSource,
    pub conditioning: Conditioning,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.row_stochastic_ok && self.self_loops_ok && self.column_sums_ok && self.b_connectivity_ok
    }
}

/// Conditional means `E[W(t+k) | F(t)]`, `k = 1..=horizon`, at a chain's
/// current state.
#[derive(Debug, Clone)]
pub struct LawEstimate {
    pub means: Vec<StochasticMatrix>,
    /// Standard error of each column sum; all zero for analytic laws.
    pub column_sum_se: Vec<Vec<f64>>,
    pub source: LawSource,
}

impl LawEstimate {
    /// Largest column-sum deviation from 1, and whether every column is
    /// within `3 SE + 1e-12` of 1.
    pub fn column_check(&self) -> (f64, bool) {
        let mut worst = 0.0f64;
        let mut ok = true;
        for (m, se) in self.means.iter().zip(&self.column_sum_se) {
            for (sum, s) in m.column_sums().iter().zip(se) {
                let dev = (sum - 1.0).abs();
                worst = worst.max(dev);
                ok &= dev <= 3.0 * s + EXACT_TOL;
            }
        }
        (worst, ok)
    }
}

/// Analytic forecasts when the chain has them, otherwise `resamples`
/// forked continuations averaged entrywise.
pub fn conditional_law_estimate(
    gen: &dyn ChainGenerator,
    horizon: usize,
    resamples: usize,
    seed: u64,
) -> Result<LawEstimate> {
    let n = gen.n();
    if let Some(means) = gen.forecast_means(horizon) {
        return Ok(LawEstimate {
            column_sum_se: vec![vec![0.0; n]; means.len()],
            means,
            source: LawSource::Analytic,
        });
    }
    if horizon == 1 {
        if let Some(m) = gen.conditional_mean() {
            return Ok(LawEstimate {
                means: vec![m],
                column_sum_se: vec![vec![0.0; n]],
                source: LawSource::Analytic,
            });
        }
    }
    if !gen.supports_resampling() || resamples < 2 {
        return Err(Error::ConditionalLawUnavailable);
    }
    let mut sum = vec![vec![0.0; n * n]; horizon];
    let mut col = vec![vec![0.0; n]; horizon];
    let mut col_sq = vec![vec![0.0; n]; horizon];
    for r in 0..resamples {
        let mut path = gen
            .fork(stream_rng(seed, r as u64))
            .ok_or(Error::ConditionalLawUnavailable)?;
        for k in 0..horizon {
            let w = path.next_matrix();
            for (a, v) in sum[k].iter_mut().zip(w.as_flat()) {
                *a += v;
            }
            for (j, c) in w.column_sums().into_iter().enumerate() {
                col[k][j] += c;
                col_sq[k][j] += c * c;
            }
        }
    }
    let r = resamples as f64;
    let means = sum
        .into_iter()
        .map(|s| StochasticMatrix::from_flat(n, s.into_iter().map(|v| v / r).collect()))
        .collect::<Result<Vec<_>>>()?;
    let column_sum_se = col
        .iter()
        .zip(&col_sq)
        .map(|(c, c2)| {
            c.iter()
                .zip(c2)
                .map(|(s, s2)| {
                    let mean = s / r;
                    let var = ((s2 / r - mean * mean) * r / (r - 1.0)).max(0.0);
                    (var / r).sqrt()
                })
                .collect()
        })
        .collect();
    Ok(LawEstimate {
        means,
        column_sum_se,
        source: LawSource::MonteCarlo,
    })
}

#[derive(Debug, Default)]
struct TrialOutcome {
    row_ok: bool,
    loops_ok: bool,
    col_dev: f64,
    col_ok: bool,
    windows: usize,
    failed: usize,
    monte_carlo: bool,
}

fn check_sample(w: &StochasticMatrix, gamma: f64) -> (bool, bool) {
    let row_ok = w
        .rows()
        .all(|r| r.iter().all(|&v| v >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() <= EXACT_TOL);
    let loops_ok = (0..w.n()).all(|i| w.get(i, i) > gamma);
    (row_ok, loops_ok)
}

fn run_trial(mut gen: Box<dyn ChainGenerator>, opts: &VerifyOptions, trial: usize) -> Result<TrialOutcome> {
    let mut out = TrialOutcome {
        row_ok: true,
        loops_ok: true,
        col_ok: true,
        ..Default::default()
    };
    let windows = opts.horizon / opts.b;
    for window in 0..windows {
        let mut means = Vec::with_capacity(opts.b);
        let absorb = |est: LawEstimate, out: &mut TrialOutcome| {
            let (dev, ok) = est.column_check();
            out.col_dev = out.col_dev.max(dev);
            out.col_ok &= ok;
            out.monte_carlo |= est.source == LawSource::MonteCarlo;
            est.means
        };
        match opts.conditioning {
            Conditioning::WindowStart => {
                let seed = derive_seed(&[opts.seed, trial as u64, window as u64]);
                let est = conditional_law_estimate(gen.as_ref(), opts.b, opts.resamples, seed)?;
                means.extend(absorb(est, &mut out));
                for _ in 0..opts.b {
                    let (r, l) = check_sample(&gen.next_matrix(), opts.gamma);
                    out.row_ok &= r;
                    out.loops_ok &= l;
                }
            }
            Conditioning::PerStep => {
                for k in 0..opts.b {
                    let seed = derive_seed(&[opts.seed, trial as u64, window as u64, k as u64]);
                    let est = conditional_law_estimate(gen.as_ref(), 1, opts.resamples, seed)?;
                    means.extend(absorb(est, &mut out));
                    let (r, l) = check_sample(&gen.next_matrix(), opts.gamma);
                    out.row_ok &= r;
                    out.loops_ok &= l;
                }
            }
        }
        let graphs = means
            .iter()
            .map(|m| graph_of(m, opts.gamma))
            .collect::<Result<Vec<_>>>()?;
        let union = union_graphs(&graphs)?;
        out.windows += 1;
        if !has_spanning_rooted_tree(&union) {
            out.failed += 1;
        }
    }
    Ok(out)
}

/// Runs `opts.trials` independent paths; `factory(trial)` builds the chain
/// for each trial.
pub fn verify_assumptions<F>(factory: F, opts: &VerifyOptions) -> Result<AssumptionReport>
where
    F: Fn(u64) -> Result<Box<dyn ChainGenerator>> + Sync + Send,
{
    if !(opts.gamma > 0.0 && opts.gamma < 1.0) {
        return Err(Error::GammaOutOfRange(opts.gamma));
    }
    if opts.b == 0 || opts.horizon < opts.b {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= B <= horizon, got B = {}, horizon = {}",
            opts.b, opts.horizon
        )));
    }
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let outcomes = opts
        .exec
        .map(opts.trials, |trial| run_trial(factory(trial as u64)?, opts, trial));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let windows: usize = outcomes.iter().map(|o| o.windows).sum();
    let failed: usize = outcomes.iter().map(|o| o.failed).sum();
    Ok(AssumptionReport {
        row_stochastic_ok: outcomes.iter().all(|o| o.row_ok),
        self_loops_ok: outcomes.iter().all(|o| o.loops_ok),
        cond_column_sums_max_dev: outcomes.iter().map(|o| o.col_dev).fold(0.0, f64::max),
        column_sums_ok: outcomes.iter().all(|o| o.col_ok),
        b_connectivity_ok: failed == 0,
        windows_checked: windows,
        windows_failed: failed,
        b_used: opts.b,
        gamma_used: opts.gamma,
        trials: opts.trials,
        horizon: opts.horizon,
        source: if outcomes.iter().any(|o| o.monte_carlo) {
            LawSource::MonteCarlo
        } else {
            LawSource::Analytic
        },
        conditioning: opts.conditioning,
    })
}
