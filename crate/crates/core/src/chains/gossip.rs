//! Randomized pairwise gossip: at every step one uniformly chosen edge
//! `{i, j}` fires and both endpoints move to their midpoint.

use crate::chains::{uniform_index, BoxedChain, ChainGenerator};
use crate::error::{Error, Result};
use crate::exec::{stream_rng, ChainRng};
use crate::graph::Topology;
use crate::stochastic::StochasticMatrix;

#[derive(Debug, Clone)]
pub struct GossipChain {
    topology: Topology,
    mean: StochasticMatrix,
    t: usize,
    rng: ChainRng,
}

pub fn pairwise_gossip_chain(topology: &Topology, seed: u64) -> Result<GossipChain> {
    GossipChain::new(topology.clone(), stream_rng(seed, 0))
}

fn edge_matrix(n: usize, i: usize, j: usize) -> Vec<f64> {
    let mut data = vec![0.0; n * n];
    for k in 0..n {
        data[k * n + k] = 1.0;
    }
    data[i * n + i] = 0.5;
    data[j * n + j] = 0.5;
    data[i * n + j] = 0.5;
    data[j * n + i] = 0.5;
    data
}

impl GossipChain {
    pub fn new(topology: Topology, rng: ChainRng) -> Result<Self> {
        if topology.n() < 2 || !topology.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        let n = topology.n();
        let edges = topology.edges();
        let weight = 1.0 / edges.len() as f64;
        let mut acc = vec![0.0; n * n];
        for &(i, j) in edges {
            for (a, v) in acc.iter_mut().zip(edge_matrix(n, i, j)) {
                *a += weight * v;
            }
        }
        let mean = StochasticMatrix::from_flat(n, acc)?;
        Ok(Self {
            topology,
            mean,
            t: 0,
            rng,
        })
    }
}

impl ChainGenerator for GossipChain {
    fn n(&self) -> usize {
        self.topology.n()
    }

    fn time(&self) -> usize {
        self.t
    }

    fn next_matrix(&mut self) -> StochasticMatrix {
        let edges = self.topology.edges();
        let (i, j) = edges[uniform_index(&mut self.rng, edges.len())];
        self.t += 1;
        StochasticMatrix::from_flat_unchecked(self.n(), edge_matrix(self.n(), i, j))
    }

    fn conditional_mean(&self) -> Option<StochasticMatrix> {
        Some(self.mean.clone())
    }

    fn forecast_means(&self, horizon: usize) -> Option<Vec<StochasticMatrix>> {
        Some(vec![self.mean.clone(); horizon])
    }

    fn fork(&self, rng: ChainRng) -> Option<BoxedChain> {
        let mut copy = self.clone();
        copy.rng = rng;
        Some(Box::new(copy))
    }

    fn name(&self) -> &'static str {
        "gossip"
    }
}
