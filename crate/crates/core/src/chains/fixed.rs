//! Deterministic chains: a constant matrix, and a replay of recorded samples.

use crate::chains::{BoxedChain, ChainGenerator};
use crate::error::{Error, Result};
use crate::exec::ChainRng;
use crate::stochastic::{StochasticMatrix, EXACT_TOL};

/// `W(t) = A` for every `t`.
#[derive(Debug, Clone)]
pub struct StaticChain {
    a: StochasticMatrix,
    doubly_stochastic: bool,
    t: usize,
}

pub fn static_chain(a: StochasticMatrix) -> StaticChain {
    let doubly_stochastic = a.is_doubly_stochastic(EXACT_TOL);
    StaticChain {
        a,
        doubly_stochastic,
        t: 0,
    }
}

impl ChainGenerator for StaticChain {
    fn n(&self) -> usize {
        self.a.n()
    }

    fn time(&self) -> usize {
        self.t
    }

    fn next_matrix(&mut self) -> StochasticMatrix {
        self.t += 1;
        self.a.clone()
    }

    /// Only reported when `A` is doubly stochastic; otherwise the law is
    /// still available through [`ChainGenerator::fork`].
    fn conditional_mean(&self) -> Option<StochasticMatrix> {
        self.doubly_stochastic.then(|| self.a.clone())
    }

    fn forecast_means(&self, horizon: usize) -> Option<Vec<StochasticMatrix>> {
        self.doubly_stochastic.then(|| vec![self.a.clone(); horizon])
    }

    fn fork(&self, _rng: ChainRng) -> Option<BoxedChain> {
        Some(Box::new(self.clone()))
    }

    fn name(&self) -> &'static str {
        "static"
    }
}

/// Plays back a recorded list of matrices, cycling when exhausted.
///
/// It carries no conditional law, so audits that need one report
/// `ConditionalLawUnavailable`.
#[derive(Debug, Clone)]
pub struct ReplayChain {
    mats: Vec<StochasticMatrix>,
    t: usize,
}

pub fn replay_chain(mats: Vec<StochasticMatrix>) -> Result<ReplayChain> {
    let Some(first) = mats.first() else {
        return Err(Error::InvalidArgument("empty replay list".into()));
    };
    let n = first.n();
    if let Some(bad) = mats.iter().find(|m| m.n() != n) {
        return Err(Error::dims(n, bad.n()));
    }
    Ok(ReplayChain { mats, t: 0 })
}

impl ChainGenerator for ReplayChain {
    fn n(&self) -> usize {
        self.mats[0].n()
    }

    fn time(&self) -> usize {
        self.t
    }

    fn next_matrix(&mut self) -> StochasticMatrix {
        let w = self.mats[self.t % self.mats.len()].clone();
        self.t += 1;
        w
    }

    fn conditional_mean(&self) -> Option<StochasticMatrix> {
        None
    }

    fn fork(&self, _rng: ChainRng) -> Option<BoxedChain> {
        None
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}
