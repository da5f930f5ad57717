//! Per-step audits of a solver run against the drift inequalities of the
//! convergence proof. Norms are `ℓ∞`; squared norms are `||·||_∞^2`.
//!
//! Part (i), deterministic, at every audited step:
//!
//! ```text
//! n <ḡ, x̄ - v>  >=  F(x̄) - F(v) - 2 Σ_i L_i ||x_i - x̄||
//! ```
//!
//! Part (ii) estimates `E[||x̄(t+1) - v||^2 | F(t)]` by resampling `W(t+1)`
//! and compares it to
//!
//! ```text
//! ||x̄ - v||^2 + α^2 L^2 / n^2 + Σ_i ||x_i - x̄||^2
//!     - (2α/n)(F(x̄) - F(v)) + (4α/n) Σ_i L_i ||x_i - x̄||
//! ```
//!
//! within three Monte Carlo standard errors.

use serde::Serialize;

use crate::chains::ChainGenerator;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, stream_rng};
use crate::optimize::objective::{dot, total, total_lipschitz, Objective};
use crate::optimize::solver::{OptRun, SubgradientPolicy};
use crate::stats::mean_se;
use crate::dynamics::InputPolicy;
use crate::stochastic::{apply, StateBlock, EXACT_TOL};

#[derive(Debug, Clone, Copy)]
pub struct LyapunovOptions {
    /// Conditional resamples per audited step for part (ii); 0 skips it.
    pub resamples: usize,
    /// Audit part (ii) every `every` steps.
    pub every: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            resamples: 0,
            every: 1,
            seed: 0,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    pub v: Vec<f64>,
    pub steps_checked: usize,
    /// Largest `RHS - LHS` of the deterministic inequality.
    pub descent_max_violation: f64,
    pub descent_violations: usize,
    /// Largest `||ḡ||^2 - L^2/n^2`.
    pub gbar_bound_max_excess: f64,
    pub drift_steps_checked: usize,
    pub drift_failures: usize,
    /// Largest `(estimate - bound) / SE` over checked steps; `-inf` if none.
    pub drift_max_excess_se: f64,
    /// Largest deviation of `x̄(t+1)` from `W̄(t+1) x(t) - α(t) ḡ(t)`, when
    /// matrices were logged.
    pub mean_dynamics_max_dev: Option<f64>,
    pub tol: f64,
}

impl LyapunovReport {
    pub fn descent_ok(&self) -> bool {
        self.descent_violations == 0
    }

    pub fn drift_ok(&self) -> bool {
        self.drift_failures == 0
    }

    pub fn passed(&self) -> bool {
        self.descent_ok()
            && self.drift_ok()
            && self.gbar_bound_max_excess <= self.tol
            && self.mean_dynamics_max_dev.is_none_or(|d| d <= EXACT_TOL)
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

struct StepTerms {
    xbar: Vec<f64>,
    gbar: Vec<f64>,
    /// `Σ_i L_i ||x_i - x̄||`.
    weighted_dev: f64,
    /// `Σ_i ||x_i - x̄||^2`.
    dev_sq: f64,
}

fn step_terms(x: &StateBlock, g: &StateBlock, objectives: &[Objective]) -> StepTerms {
    let xbar = x.mean();
    let gbar = g.mean();
    let mut weighted_dev = 0.0;
    let mut dev_sq = 0.0;
    for (row, f) in x.rows().zip(objectives) {
        let d = norm_inf(&sub(row, &xbar));
        weighted_dev += f.lipschitz() * d;
        dev_sq += d * d;
    }
    StepTerms {
        xbar,
        gbar,
        weighted_dev,
        dev_sq,
    }
}

/// Audits `run`. `replay`, when given, must be a fresh generator that
/// reproduces the run's chain; it is advanced in lockstep and forked to
/// sample `W(t+1)` from its conditional law.
pub fn lyapunov_audit(
    run: &OptRun,
    objectives: &[Objective],
    v: &[f64],
    mut replay: Option<&mut dyn ChainGenerator>,
    opts: LyapunovOptions,
) -> Result<LyapunovReport> {
    let traj = &run.trajectory;
    let n = traj.states[0].n();
    let m = traj.states[0].m();
    if v.len() != m || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::dims(format!("finite point in R^{m}"), v.len()));
    }
    if objectives.len() != n {
        return Err(Error::dims(n, objectives.len()));
    }
    let wants_drift = opts.resamples > 0;
    if wants_drift {
        match replay.as_deref() {
            Some(g) if g.supports_resampling() => {}
            _ => return Err(Error::ConditionalLawUnavailable),
        }
    }
    let mut policy = SubgradientPolicy {
        objectives,
        schedule: run.schedule,
    };
    let l_total = total_lipschitz(objectives);
    let f_v = total(objectives, v);
    let nf = n as f64;
    let every = opts.every.max(1);

    let mut report = LyapunovReport {
        v: v.to_vec(),
        steps_checked: 0,
        descent_max_violation: f64::NEG_INFINITY,
        descent_violations: 0,
        gbar_bound_max_excess: f64::NEG_INFINITY,
        drift_steps_checked: 0,
        drift_failures: 0,
        drift_max_excess_se: f64::NEG_INFINITY,
        mean_dynamics_max_dev: traj.matrices.as_ref().map(|_| 0.0),
        tol: opts.tol,
    };

    let steps = traj.steps();
    for k in 0..=steps {
        let t = traj.t0 + k;
        let x = &traj.states[k];
        let g = policy.subgradients(x);
        let terms = step_terms(x, &g, objectives);
        let f_xbar = total(objectives, &terms.xbar);
        let diff = sub(&terms.xbar, v);

        let lhs = nf * dot(&terms.gbar, &diff);
        let rhs = f_xbar - f_v - 2.0 * terms.weighted_dev;
        let violation = rhs - lhs;
        report.descent_max_violation = report.descent_max_violation.max(violation);
        if violation > opts.tol {
            report.descent_violations += 1;
        }
        let gbar_sq = norm_inf(&terms.gbar).powi(2);
        report.gbar_bound_max_excess = report
            .gbar_bound_max_excess
            .max(gbar_sq - (l_total / nf).powi(2));
        report.steps_checked += 1;

        if k == steps {
            break;
        }
        let alpha = run.schedule.alpha(t);

        if let (Some(dev), Some(mats)) = (report.mean_dynamics_max_dev.as_mut(), traj.matrices.as_ref()) {
            let wx = apply(&mats[k], x)?.mean();
            let predicted: Vec<f64> = wx.iter().zip(&terms.gbar).map(|(a, b)| a - alpha * b).collect();
            let actual = &run.xbar[k + 1];
            *dev = dev.max(norm_inf(&sub(&predicted, actual)));
        }

        if let Some(gen) = replay.as_deref_mut() {
            if wants_drift && k % every == 0 {
                let bound = diff.iter().fold(0.0f64, |a, d| a.max(d.abs())).powi(2)
                    + (alpha * l_total / nf).powi(2)
                    + terms.dev_sq
                    - 2.0 * alpha / nf * (f_xbar - f_v)
                    + 4.0 * alpha / nf * terms.weighted_dev;
                let samples: Vec<f64> = (0..opts.resamples)
                    .map(|r| {
                        let rng = stream_rng(derive_seed(&[opts.seed, t as u64]), r as u64);
                        let w = gen.resample_next(rng).expect("resampling checked above");
                        let next = apply(&w, x).expect("dimensions checked").mean();
                        let z: Vec<f64> = next
                            .iter()
                            .zip(&terms.gbar)
                            .zip(v)
                            .map(|((a, b), c)| a - alpha * b - c)
                            .collect();
                        norm_inf(&z).powi(2)
                    })
                    .collect();
                let (mean, se) = mean_se(&samples);
                report.drift_steps_checked += 1;
                let excess = mean - bound;
                if excess > 3.0 * se + opts.tol {
                    report.drift_failures += 1;
                }
                let scaled = if se > 0.0 { excess / se } else if excess > opts.tol { f64::INFINITY } else { f64::NEG_INFINITY };
                report.drift_max_excess_se = report.drift_max_excess_se.max(scaled);
            }
            // keep the replay in lockstep and make sure it is the same path
            let w = gen.next_matrix();
            let rebuilt = apply(&w, x)?.add(&policy.input(t, x))?;
            if rebuilt.max_abs_diff(&traj.states[k + 1])? > 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "replay generator diverges from the run at t = {}",
                    t + 1
                )));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummabilityTails {
    /// `Σ_{t in [T/2, T)} α(t) max_i ||x_i(t) - x̄(t)||`.
    pub alpha_weighted_tail: f64,
    /// `Σ_{t in [T/2, T)} max_i ||x_i(t) - x̄(t)||^2`.
    pub squared_tail: f64,
    pub alpha_weighted_total: f64,
    pub squared_total: f64,
}

/// Tail increments over the second half of the run of the two series whose
/// summability the convergence proof relies on.
pub fn summability_tails(run: &OptRun) -> SummabilityTails {
    let states = &run.trajectory.states;
    let half = states.len() / 2;
    let mut out = SummabilityTails {
        alpha_weighted_tail: 0.0,
        squared_tail: 0.0,
        alpha_weighted_total: 0.0,
        squared_total: 0.0,
    };
    for (k, x) in states.iter().enumerate() {
        let xbar = &run.xbar[k];
        let dev = x.rows().map(|r| norm_inf(&sub(r, xbar))).fold(0.0, f64::max);
        let a = run.alphas[k] * dev;
        let s = dev * dev;
        out.alpha_weighted_total += a;
        out.squared_total += s;
        if k >= half {
            out.alpha_weighted_tail += a;
            out.squared_tail += s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{replay_chain, token_chain};
    use crate::graph::Topology;
    use crate::optimize::objective::abs_deviation;
    use crate::optimize::schedule::make_schedule;
    use crate::optimize::solver::{solve_distributed, SolverOptions};
    use crate::stochastic::StochasticMatrix;

    fn median_problem(n: usize) -> Vec<Objective> {
        (0..n)
            .map(|i| abs_deviation(vec![i as f64 - (n as f64 - 1.0) / 2.0]).unwrap())
            .collect()
    }

    #[test]
    fn deterministic_part_on_token_run() {
        let topo = Topology::cycle(3).unwrap();
        let f = median_problem(3);
        let sched = make_schedule(1.0, 0.75, 1).unwrap();
        let run = solve_distributed(
            &mut token_chain(&topo, 2).unwrap(),
            &f,
            sched,
            &StateBlock::spread(3, 1),
            2000,
            SolverOptions { log_matrices: true, log_inputs: false },
        )
        .unwrap();
        for v in [0.0, 1.0, -3.0] {
            let r = lyapunov_audit(&run, &f, &[v], None, LyapunovOptions::default()).unwrap();
            assert!(r.descent_ok(), "{r:?}");
            assert_eq!(r.steps_checked, 2001);
            assert!(r.gbar_bound_max_excess <= 1e-12);
            assert!(r.mean_dynamics_max_dev.unwrap() <= 1e-12);
        }
    }

    #[test]
    fn v_equal_to_mean_has_nonpositive_rhs() {
        let f = median_problem(3);
        let x0 = StateBlock::new(vec![vec![0.2], vec![1.0], vec![-0.4]]).unwrap();
        let sched = make_schedule(1.0, 0.75, 1).unwrap();
        let run = solve_distributed(
            &mut token_chain(&Topology::cycle(3).unwrap(), 1).unwrap(),
            &f,
            sched,
            &x0,
            0,
            SolverOptions::default(),
        )
        .unwrap();
        let v = x0.mean();
        let r = lyapunov_audit(&run, &f, &v, None, LyapunovOptions::default()).unwrap();
        assert!(r.descent_max_violation <= 0.0);
    }

    #[test]
    fn drift_bound_holds_with_resampling() {
        let topo = Topology::cycle(3).unwrap();
        let f = median_problem(3);
        let sched = make_schedule(1.0, 0.75, 1).unwrap();
        let run = solve_distributed(
            &mut token_chain(&topo, 6).unwrap(),
            &f,
            sched,
            &StateBlock::spread(3, 1),
            300,
            SolverOptions::default(),
        )
        .unwrap();
        let mut replay = token_chain(&topo, 6).unwrap();
        let opts = LyapunovOptions { resamples: 400, every: 7, seed: 3, tol: 1e-9 };
        let r = lyapunov_audit(&run, &f, &[0.5], Some(&mut replay), opts).unwrap();
        assert!(r.drift_steps_checked > 40);
        assert!(r.drift_ok(), "{r:?}");
        assert!(r.passed());
    }

    #[test]
    fn consensus_with_zero_subgradient_has_slack() {
        let f: Vec<_> = (0..3).map(|_| abs_deviation(vec![1.0]).unwrap()).collect();
        let topo = Topology::cycle(3).unwrap();
        let sched = make_schedule(1.0, 0.75, 1).unwrap();
        let x0 = StateBlock::consensus(3, &[1.0]);
        let run = solve_distributed(&mut token_chain(&topo, 0).unwrap(), &f, sched, &x0, 20, SolverOptions::default()).unwrap();
        let mut replay = token_chain(&topo, 0).unwrap();
        let opts = LyapunovOptions { resamples: 50, ..Default::default() };
        let r = lyapunov_audit(&run, &f, &[0.0], Some(&mut replay), opts).unwrap();
        assert!(r.passed());
        assert!(r.drift_max_excess_se < 0.0);
    }

    #[test]
    fn errors() {
        let f = median_problem(2);
        let sched = make_schedule(1.0, 0.75, 1).unwrap();
        let mut chain = replay_chain(vec![StochasticMatrix::uniform(2)]).unwrap();
        let run = solve_distributed(&mut chain, &f, sched, &StateBlock::spread(2, 1), 5, SolverOptions::default()).unwrap();
        let mut replay = replay_chain(vec![StochasticMatrix::uniform(2)]).unwrap();
        let opts = LyapunovOptions { resamples: 10, ..Default::default() };
        assert!(matches!(
            lyapunov_audit(&run, &f, &[0.0], Some(&mut replay), opts),
            Err(Error::ConditionalLawUnavailable)
        ));
        assert!(lyapunov_audit(&run, &f, &[0.0, 1.0], None, LyapunovOptions::default()).is_err());

        // a replay on a different seed is rejected
        let topo = Topology::cycle(3).unwrap();
        let f3 = median_problem(3);
        let run = solve_distributed(&mut token_chain(&topo, 1).unwrap(), &f3, sched, &StateBlock::spread(3, 1), 50, SolverOptions::default()).unwrap();
        let mut wrong = token_chain(&topo, 2).unwrap();
        assert!(lyapunov_audit(&run, &f3, &[0.0], Some(&mut wrong), LyapunovOptions::default()).is_err());
    }

    #[test]
    fn tails_shrink_relative_to_totals() {
        let topo = Topology::cycle(5).unwrap();
        let f = median_problem(5);
        let sched = make_schedule(1.0, 0.75, 1).unwrap();
        let run = solve_distributed(&mut token_chain(&topo, 3).unwrap(), &f, sched, &StateBlock::spread(5, 1), 20_000, SolverOptions::default()).unwrap();
        let tails = summability_tails(&run);
        assert!(tails.alpha_weighted_tail < 0.2 * tails.alpha_weighted_total);
        assert!(tails.squared_tail < 0.2 * tails.squared_total);
    }
}
