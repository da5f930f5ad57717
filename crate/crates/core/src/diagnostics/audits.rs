//! Path-wise audits over logged runs and conditional-law checks.

use serde::Serialize;

use crate::chains::{conditional_law_estimate, ChainGenerator, LawSource};
use crate::dynamics::{backward_products, Trajectory};
use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::stochastic::{compose, diam, state_diameter, StochasticMatrix};

#[derive(Debug, Clone, Serialize)]
pub struct ColumnCheck {
    pub steps: usize,
    /// Largest `|Σ_i E[w_ij] - 1|` over checked steps and columns.
    pub max_dev: f64,
    /// Largest column-sum standard error (zero for analytic laws).
    pub max_se: f64,
    pub source: LawSource,
    /// Every column within `3 SE + 1e-12` of 1.
    pub passed: bool,
}

/// Checks `E[W(t+1) | F(t)]` for column-stochasticity at `steps`
/// consecutive states of `gen`, advancing it as it goes.
pub fn conditional_column_check(
    gen: &mut dyn ChainGenerator,
    steps: usize,
    resamples: usize,
    seed: u64,
) -> Result<ColumnCheck> {
    let mut out = ColumnCheck {
        steps,
        max_dev: 0.0,
        max_se: 0.0,
        source: LawSource::Analytic,
        passed: true,
    };
    for k in 0..steps {
        let est = conditional_law_estimate(gen, 1, resamples, derive_seed(&[seed, k as u64]))?;
        let (dev, ok) = est.column_check();
        out.max_dev = out.max_dev.max(dev);
        out.max_se = est
            .column_sum_se
            .iter()
            .flatten()
            .fold(out.max_se, |a, b| a.max(*b));
        out.passed &= ok;
        if est.source == LawSource::MonteCarlo {
            out.source = LawSource::MonteCarlo;
        }
        gen.next_matrix();
    }
    Ok(out)
}

/// Largest `LHS - RHS` of
/// `d(x(t)) <= diam Φ(t,τ) d(x(τ)) + Σ_{s=τ}^{t-1} diam Φ(t,s+1) d(u(s))`
/// over the given `(τ, t)` pairs.
pub fn consensus_bound_audit(traj: &Trajectory, pairs: &[(usize, usize)]) -> Result<f64> {
    if traj.matrices.is_none() {
        return Err(Error::MissingLogs("matrices"));
    }
    if traj.controlled && traj.inputs.is_none() {
        return Err(Error::MissingLogs("inputs"));
    }
    let mut worst = f64::NEG_INFINITY;
    for &(tau, t) in pairs {
        if tau > t || tau < traj.t0 || t > traj.t_end() {
            return Err(Error::IndexOutOfRange(format!("({tau}, {t})")));
        }
        let products = backward_products(traj, tau, t)?;
        let phi = match products.last() {
            Some(p) => compose(p, traj.matrix(tau + 1)?)?,
            None => StochasticMatrix::identity(traj.states[0].n()),
        };
        let mut rhs = diam(&phi) * state_diameter(traj.state(tau)?);
        if traj.controlled {
            for (idx, s) in (tau..t).rev().enumerate() {
                rhs += diam(&products[idx]) * state_diameter(&traj.input(s)?);
            }
        }
        worst = worst.max(state_diameter(traj.state(t)?) - rhs);
    }
    Ok(worst)
}

/// `a(s) = diam Φ(L(s+1), Ls)` for `s = 0..windows`, one sample path.
pub fn window_diameters(gen: &mut dyn ChainGenerator, len: usize, windows: usize) -> Vec<f64> {
    (0..windows)
        .map(|_| {
            let mut phi = StochasticMatrix::identity(gen.n());
            for _ in 0..len {
                phi = compose(&gen.next_matrix(), &phi).expect("chain keeps its size");
            }
            diam(&phi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{link_failure_chain, static_chain, token_chain, FailureSchedule};
    use crate::dynamics::{run_autonomous, run_controlled, RunOptions};
    use crate::graph::Topology;
    use crate::stochastic::StateBlock;

    #[test]
    fn analytic_checks_and_negative_control() {
        let mut tok = token_chain(&Topology::cycle(5).unwrap(), 1).unwrap();
        let c = conditional_column_check(&mut tok, 100, 0, 0).unwrap();
        assert!(c.passed && c.max_dev <= 1e-12 && c.source == LawSource::Analytic);

        let base = Topology::cycle(5).unwrap().metropolis();
        let mut lf = link_failure_chain(vec![base], FailureSchedule::Constant(0.3), 2).unwrap();
        let c = conditional_column_check(&mut lf, 100, 0, 0).unwrap();
        assert!(c.passed && c.max_dev <= 1e-12);

        let bad = StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap();
        let mut neg = static_chain(bad);
        let c = conditional_column_check(&mut neg, 3, 10, 0).unwrap();
        assert!(!c.passed);
        assert!((c.max_dev - 0.4).abs() < 1e-12);
    }

    #[test]
    fn consensus_bound_cases() {
        let topo = Topology::cycle(4).unwrap();
        let mut g = token_chain(&topo, 3).unwrap();
        let traj = run_autonomous(&mut g, &StateBlock::spread(4, 2), 80, RunOptions::logged()).unwrap();
        assert_eq!(consensus_bound_audit(&traj, &[(10, 10)]).unwrap(), 0.0);
        assert!(consensus_bound_audit(&traj, &[(1, 81), (5, 50), (30, 31)]).unwrap() <= 1e-10);

        let mut k = 0u64;
        let mut policy = |_t: usize, x: &StateBlock| {
            k += 1;
            let data = (0..x.n() * x.m()).map(|i| (((k + 3 * i as u64) * 7919) % 101) as f64 / 101.0 - 0.5).collect();
            StateBlock::from_flat(x.n(), x.m(), data).unwrap()
        };
        let mut g = token_chain(&topo, 3).unwrap();
        let traj = run_controlled(&mut g, &StateBlock::spread(4, 1), &mut policy, 80, RunOptions::logged()).unwrap();
        assert!(consensus_bound_audit(&traj, &[(1, 81), (20, 60), (40, 41)]).unwrap() <= 1e-8);

        let mut g = token_chain(&topo, 3).unwrap();
        let unlogged = run_autonomous(&mut g, &StateBlock::spread(4, 1), 5, RunOptions::default()).unwrap();
        assert!(matches!(consensus_bound_audit(&unlogged, &[(1, 2)]), Err(Error::MissingLogs(_))));
    }

    #[test]
    fn windows_of_averaging_chain_are_zero() {
        let mut g = static_chain(StochasticMatrix::uniform(3));
        assert_eq!(window_diameters(&mut g, 2, 4), vec![0.0; 4]);
        let mut id = static_chain(StochasticMatrix::identity(3));
        assert_eq!(window_diameters(&mut id, 2, 3), vec![1.0; 3]);
    }
}
