//! Token-passing gossip over an undirected graph.
//!
//! The token holder `h = l(t)` picks a uniform neighbour `s`. With
//! probability 1/2 it passes the token to `s` (so `l(t+1) = s`), otherwise it
//! keeps it (`l(t+1) = h`). The agent holding the token at `t+1` replaces its
//! state by the midpoint of its own and the other party's, every other agent
//! keeps its state. Given `l(t) = h` the expected matrix is `V(h)`:
//!
//! ```text
//! v_hh = 3/4,   v_hj = v_jh = 1/(4 deg h)   for neighbours j of h,
//! v_jj = 1 - 1/(4 deg h)                    for neighbours j of h,
//! identity rows elsewhere.
//! ```

use crate::chains::{fair_coin, uniform_index, BoxedChain, ChainGenerator};
use crate::error::{Error, Result};
use crate::exec::{stream_rng, ChainRng};
use crate::graph::Topology;
use crate::stochastic::StochasticMatrix;

#[derive(Debug, Clone)]
pub struct TokenChain {
    topology: Topology,
    holder: usize,
    t: usize,
    rng: ChainRng,
}

pub fn token_chain(topology: &Topology, seed: u64) -> Result<TokenChain> {
    TokenChain::new(topology.clone(), 0, stream_rng(seed, 0))
}

impl TokenChain {
    pub fn new(topology: Topology, initial_holder: usize, rng: ChainRng) -> Result<Self> {
        if topology.n() < 2 || !topology.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        if initial_holder >= topology.n() {
            return Err(Error::InvalidArgument(format!(
                "initial holder {initial_holder} outside 0..{}",
                topology.n()
            )));
        }
        Ok(Self {
            topology,
            holder: initial_holder,
            t: 0,
            rng,
        })
    }

    /// Current token holder `l(t)`.
    pub fn holder(&self) -> usize {
        self.holder
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// One-step transition probabilities of the holder process.
    fn holder_transition(&self, from: usize) -> Vec<(usize, f64)> {
        let nb = self.topology.neighbours(from);
        let p = 0.5 / nb.len() as f64;
        std::iter::once((from, 0.5))
            .chain(nb.iter().map(|&j| (j, p)))
            .collect()
    }
}

/// The conditional mean `V(h)` of the next matrix when `h` holds the token.
pub fn token_expectation(topology: &Topology, h: usize) -> StochasticMatrix {
    let n = topology.n();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
    }
    let q = 1.0 / (4.0 * topology.degree(h) as f64);
    data[h * n + h] = 0.75;
    for &j in topology.neighbours(h) {
        data[h * n + j] = q;
        data[j * n + h] = q;
        data[j * n + j] = 1.0 - q;
    }
    StochasticMatrix::from_flat_unchecked(n, data)
}

impl ChainGenerator for TokenChain {
    fn n(&self) -> usize {
        self.topology.n()
    }

    fn time(&self) -> usize {
        self.t
    }

    fn next_matrix(&mut self) -> StochasticMatrix {
        let nb = self.topology.neighbours(self.holder);
        let s = nb[uniform_index(&mut self.rng, nb.len())];
        let (receiver, partner) = if fair_coin(&mut self.rng) {
            (s, self.holder)
        } else {
            (self.holder, s)
        };
        self.holder = receiver;
        self.t += 1;

        let n = self.n();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        data[receiver * n + receiver] = 0.5;
        data[receiver * n + partner] = 0.5;
        StochasticMatrix::from_flat_unchecked(n, data)
    }

    fn conditional_mean(&self) -> Option<StochasticMatrix> {
        Some(token_expectation(&self.topology, self.holder))
    }

    /// `E[W(t+k) | F(t)] = Σ_i P(l(t+k-1) = i | l(t)) V(i)`.
    fn forecast_means(&self, horizon: usize) -> Option<Vec<StochasticMatrix>> {
        let n = self.n();
        let expectations: Vec<_> = (0..n).map(|h| token_expectation(&self.topology, h)).collect();
        let mut dist = vec![0.0; n];
        dist[self.holder] = 1.0;
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut acc = vec![0.0; n * n];
            for (h, &p) in dist.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (a, v) in acc.iter_mut().zip(expectations[h].as_flat()) {
                    *a += p * v;
                }
            }
            out.push(StochasticMatrix::from_flat(n, acc).ok()?);

            let mut next = vec![0.0; n];
            for (h, &p) in dist.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (j, q) in self.holder_transition(h) {
                    next[j] += p * q;
                }
            }
            dist = next;
        }
        Some(out)
    }

    fn fork(&self, rng: ChainRng) -> Option<BoxedChain> {
        let mut copy = self.clone();
        copy.rng = rng;
        Some(Box::new(copy))
    }

    fn name(&self) -> &'static str {
        "token"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Topology {
        Topology::from_edges(2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn two_node_expectation() {
        let v = token_expectation(&pair(), 0);
        assert_eq!(v.to_rows(), vec![vec![0.75, 0.25], vec![0.25, 0.75]]);
    }

    #[test]
    fn expectation_is_doubly_stochastic_on_irregular_graph() {
        let g = Topology::from_edges(5, &[(0, 1), (0, 2), (0, 3), (3, 4), (1, 2)]).unwrap();
        for h in 0..5 {
            let v = token_expectation(&g, h);
            assert!(v.column_deviation() <= 1e-12, "h={h}");
            for row in v.rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn two_node_outcomes_enumerated() {
        // On one edge the neighbour is forced; the coin decides who receives.
        // Either way the receiver row is (1/2, 1/2) and the other row is identity.
        let mut seen = [false; 2];
        let mut chain = TokenChain::new(pair(), 0, stream_rng(3, 0)).unwrap();
        for _ in 0..200 {
            let w = chain.next_matrix();
            let r = chain.holder();
            seen[r] = true;
            assert_eq!(w.row(r), &[0.5, 0.5]);
            let other = 1 - r;
            let mut unit = [0.0; 2];
            unit[other] = 1.0;
            assert_eq!(w.row(other), &unit);
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn rejects_disconnected() {
        let g = Topology::from_edges(3, &[(0, 1)]).unwrap();
        assert!(matches!(token_chain(&g, 1), Err(Error::DisconnectedGraph)));
        let single = Topology::from_edges(1, &[]).unwrap();
        assert!(token_chain(&single, 1).is_err());
    }

    #[test]
    fn first_forecast_is_conditional_mean() {
        let g = Topology::cycle(5).unwrap();
        let chain = token_chain(&g, 9).unwrap();
        let f = chain.forecast_means(3).unwrap();
        assert_eq!(f[0], chain.conditional_mean().unwrap());
        for m in &f {
            assert!(m.column_deviation() <= 1e-12);
        }
    }
}
