//! Random weight-matrix chains `{W(t)}` adapted to a filtration.
//!
//! A generator's internal state (time index, token position, RNG stream)
//! stands in for the filtration `F(t)`: the conditional law of the next
//! matrix is a function of that state only. Generators expose
//!
//! * [`ChainGenerator::conditional_mean`]: the analytic `E[W(t+1) | F(t)]`,
//!   when it has a closed form;
//! * [`ChainGenerator::forecast_means`]: `E[W(t+k) | F(t)]` for `k = 1..=h`;
//! * [`ChainGenerator::fork`]: a copy of the current state driven by a fresh
//!   random stream, which is how the conditional law is resampled when no
//!   closed form exists.

mod fixed;
mod gossip;
mod link_failure;
mod spec;
mod token;
mod verify;

use rand::RngCore;

use crate::exec::ChainRng;
use crate::stochastic::StochasticMatrix;

pub use fixed::{replay_chain, static_chain, ReplayChain, StaticChain};
pub use gossip::{pairwise_gossip_chain, GossipChain};
pub use link_failure::{link_failure_chain, FailureSchedule, LinkFailureChain};
pub use spec::{BaseSpec, ChainKind, ChainSpec, GraphSpec};
pub use token::{token_chain, token_expectation, TokenChain};
pub use verify::{
    conditional_law_estimate, verify_assumptions, AssumptionReport, Conditioning, LawEstimate,
    LawSource, VerifyOptions,
};

/// One realized matrix of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep {
    /// Time index of the matrix, i.e. this is `W(t)`.
    pub t: usize,
    pub w: StochasticMatrix,
    /// Analytic `E[W(t) | F(t-1)]`, when available.
    pub cond_exp: Option<StochasticMatrix>,
}

pub type BoxedChain = Box<dyn ChainGenerator>;

pub trait ChainGenerator: Send {
    fn n(&self) -> usize;

    /// Current filtration time `t`; the next sample is `W(t+1)`.
    fn time(&self) -> usize;

    /// Draws `W(t+1)` and advances the state to time `t+1`.
    fn next_matrix(&mut self) -> StochasticMatrix;

    /// Analytic `E[W(t+1) | F(t)]`.
    fn conditional_mean(&self) -> Option<StochasticMatrix>;

    /// Analytic `E[W(t+k) | F(t)]` for `k = 1..=horizon`.
    fn forecast_means(&self, horizon: usize) -> Option<Vec<StochasticMatrix>> {
        let _ = horizon;
        None
    }

    /// A copy of the current state whose future randomness comes from `rng`.
    /// `None` when the chain cannot resample its conditional law.
    fn fork(&self, rng: ChainRng) -> Option<BoxedChain>;

    fn name(&self) -> &'static str;

    /// Draws `W(t+1)` together with its analytic conditional mean.
    fn step(&mut self) -> ChainStep {
        let cond_exp = self.conditional_mean();
        let w = self.next_matrix();
        ChainStep {
            t: self.time(),
            w,
            cond_exp,
        }
    }

    /// Samples `W(t+1)` from its conditional law without advancing.
    fn resample_next(&self, rng: ChainRng) -> Option<StochasticMatrix> {
        self.fork(rng).map(|mut g| g.next_matrix())
    }

    fn supports_resampling(&self) -> bool {
        self.fork(crate::exec::stream_rng(0, 0)).is_some()
    }
}

pub(crate) fn uniform_index(rng: &mut ChainRng, len: usize) -> usize {
    debug_assert!(len > 0);
    let len = len as u64;
    let zone = u64::MAX - (u64::MAX % len);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % len) as usize;
        }
    }
}

pub(crate) fn fair_coin(rng: &mut ChainRng) -> bool {
    rng.next_u32() & 1 == 1
}

/// Bernoulli draw with success probability `p`, from 53 random bits.
pub(crate) fn bernoulli(rng: &mut ChainRng, p: f64) -> bool {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u < p
}
