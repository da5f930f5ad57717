//! A doubly stochastic base schedule `A(t)` degraded by random link failures.
//!
//! Each off-diagonal link `(i, j)` with `a_ij > 0` survives independently
//! with probability `1 - p(t)`. Failed mass is folded back onto the diagonal:
//!
//! ```text
//! w_ij = a_ij b_ij            (i != j)
//! w_ii = 1 - Σ_{j != i} a_ij b_ij
//! ```
//!
//! so `W(t)` is row-stochastic and `E[W(t) | F(t-1)]` has off-diagonal
//! entries `(1 - p(t)) a_ij`, which keeps it doubly stochastic.

use serde::{Deserialize, Serialize};

use crate::chains::{bernoulli, BoxedChain, ChainGenerator};
use crate::error::{Error, Result};
use crate::exec::{stream_rng, ChainRng};
use crate::stochastic::{StochasticMatrix, EXACT_TOL};

/// Failure probability `p(t)` for `t >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FailureSchedule {
    Constant(f64),
    /// `p(t) = values[(t - 1) mod len]`.
    Cyclic(Vec<f64>),
}

impl FailureSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            FailureSchedule::Constant(p) => *p,
            FailureSchedule::Cyclic(v) => v[(t.max(1) - 1) % v.len()],
        }
    }

    fn validate(&self) -> Result<()> {
        let values: &[f64] = match self {
            FailureSchedule::Constant(p) => std::slice::from_ref(p),
            FailureSchedule::Cyclic(v) if v.is_empty() => {
                return Err(Error::InvalidArgument("empty failure schedule".into()))
            }
            FailureSchedule::Cyclic(v) => v,
        };
        match values.iter().find(|p| !(**p >= 0.0 && **p < 1.0)) {
            Some(&p) => Err(Error::POutOfRange(p)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkFailureChain {
    base: Vec<StochasticMatrix>,
    p: FailureSchedule,
    t: usize,
    rng: ChainRng,
}

pub fn link_failure_chain(
    base: Vec<StochasticMatrix>,
    p: FailureSchedule,
    seed: u64,
) -> Result<LinkFailureChain> {
    LinkFailureChain::new(base, p, stream_rng(seed, 0))
}

impl LinkFailureChain {
    /// `base[(t - 1) mod len]` is used as `A(t)`.
    pub fn new(base: Vec<StochasticMatrix>, p: FailureSchedule, rng: ChainRng) -> Result<Self> {
        let Some(first) = base.first() else {
            return Err(Error::InvalidArgument("empty base schedule".into()));
        };
        let n = first.n();
        for (index, a) in base.iter().enumerate() {
            if a.n() != n {
                return Err(Error::dims(n, a.n()));
            }
            let deviation = a.column_deviation();
            if deviation > EXACT_TOL {
                return Err(Error::BaseNotDoublyStochastic { index, deviation });
            }
        }
        p.validate()?;
        Ok(Self { base, p, t: 0, rng })
    }

    fn base_at(&self, t: usize) -> &StochasticMatrix {
        &self.base[(t.max(1) - 1) % self.base.len()]
    }

    /// `E[W(t) | F(t-1)]`, deterministic in `t`.
    pub fn mean_at(&self, t: usize) -> StochasticMatrix {
        let a = self.base_at(t);
        let keep = 1.0 - self.p.at(t);
        let n = a.n();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if j != i {
                    let w = keep * a.get(i, j);
                    data[i * n + j] = w;
                    off += w;
                }
            }
            data[i * n + i] = 1.0 - off;
        }
        StochasticMatrix::from_flat_unchecked(n, data)
    }
}

impl ChainGenerator for LinkFailureChain {
    fn n(&self) -> usize {
        self.base[0].n()
    }

    fn time(&self) -> usize {
        self.t
    }

    fn next_matrix(&mut self) -> StochasticMatrix {
        self.t += 1;
        let t = self.t;
        let p = self.p.at(t);
        let n = self.n();
        let a = self.base_at(t).clone();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                let aij = a.get(i, j);
                if j == i || aij == 0.0 {
                    continue;
                }
                if !bernoulli(&mut self.rng, p) {
                    data[i * n + j] = aij;
                    off += aij;
                }
            }
            data[i * n + i] = 1.0 - off;
        }
        StochasticMatrix::from_flat_unchecked(n, data)
    }

    fn conditional_mean(&self) -> Option<StochasticMatrix> {
        Some(self.mean_at(self.t + 1))
    }

    fn forecast_means(&self, horizon: usize) -> Option<Vec<StochasticMatrix>> {
        Some((1..=horizon).map(|k| self.mean_at(self.t + k)).collect())
    }

    fn fork(&self, rng: ChainRng) -> Option<BoxedChain> {
        let mut copy = self.clone();
        copy.rng = rng;
        Some(Box::new(copy))
    }

    fn name(&self) -> &'static str {
        "link_failure"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Topology;

    fn metropolis_c5() -> StochasticMatrix {
        Topology::cycle(5).unwrap().metropolis()
    }

    #[test]
    fn no_failures_reproduces_base() {
        let a = metropolis_c5();
        let mut chain = link_failure_chain(vec![a.clone()], FailureSchedule::Constant(0.0), 1).unwrap();
        for _ in 0..10 {
            assert_eq!(chain.next_matrix(), a);
        }
    }

    #[test]
    fn all_links_failed_gives_identity() {
        // p just below one: every link fails with overwhelming probability,
        // and a fully failed sample must be exactly the identity.
        let a = metropolis_c5();
        let mut chain =
            link_failure_chain(vec![a], FailureSchedule::Constant(1.0 - 1e-15), 2).unwrap();
        assert_eq!(chain.next_matrix(), StochasticMatrix::identity(5));
    }

    #[test]
    fn mean_column_sums_are_one_for_any_p() {
        let a = Topology::complete(4).unwrap().metropolis();
        for p in [0.0, 0.1, 0.5, 0.9, 0.999] {
            let chain = link_failure_chain(vec![a.clone()], FailureSchedule::Constant(p), 0).unwrap();
            assert!(chain.conditional_mean().unwrap().column_deviation() <= 1e-12);
        }
    }

    #[test]
    fn validation_errors() {
        let bad = StochasticMatrix::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            link_failure_chain(vec![bad], FailureSchedule::Constant(0.1), 0),
            Err(Error::BaseNotDoublyStochastic { index: 0, .. })
        ));
        for p in [1.0, -0.1, f64::NAN] {
            assert!(matches!(
                link_failure_chain(vec![metropolis_c5()], FailureSchedule::Constant(p), 0),
                Err(Error::POutOfRange(_))
            ));
        }
        assert!(link_failure_chain(
            vec![metropolis_c5()],
            FailureSchedule::Cyclic(vec![0.2, 1.5]),
            0
        )
        .is_err());
    }

    #[test]
    fn schedules_cycle() {
        let s = FailureSchedule::Cyclic(vec![0.1, 0.2, 0.3]);
        assert_eq!([s.at(1), s.at(2), s.at(3), s.at(4)], [0.1, 0.2, 0.3, 0.1]);
    }
}
