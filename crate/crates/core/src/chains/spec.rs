//! Declarative chain configuration, as read from JSON.
//!
//! ```json
//! {"type": "token", "graph": {"kind": "cycle", "n": 5}, "seed": 1, "gamma": 0.01, "B": 5}
//! ```

use serde::{Deserialize, Serialize};

use crate::chains::{
    static_chain, BoxedChain, FailureSchedule, GossipChain, LinkFailureChain, TokenChain,
};
use crate::error::{Error, Result};
use crate::exec::stream_rng;
use crate::graph::Topology;
use crate::stochastic::StochasticMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    Token,
    Gossip,
    LinkFailure,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Cycle { n: usize },
    Path { n: usize },
    Complete { n: usize },
    Edges { n: usize, edges: Vec<(usize, usize)> },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Topology> {
        match self {
            GraphSpec::Cycle { n } => Topology::cycle(*n),
            GraphSpec::Path { n } => Topology::path(*n),
            GraphSpec::Complete { n } => Topology::complete(*n),
            GraphSpec::Edges { n, edges } => Topology::from_edges(*n, edges),
        }
    }
}

/// One entry of a link-failure base schedule: a graph (turned into its
/// Metropolis weights) or an explicit matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseSpec {
    Graph(GraphSpec),
    Matrix(StochasticMatrix),
}

impl BaseSpec {
    pub fn build(&self) -> Result<StochasticMatrix> {
        match self {
            BaseSpec::Graph(g) => Ok(g.build()?.metropolis()),
            BaseSpec::Matrix(m) => Ok(m.clone()),
        }
    }
}

fn default_gamma() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    #[serde(rename = "type")]
    pub kind: ChainKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    /// Link-failure probability: a number or a cyclic list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<FailureSchedule>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Connectivity window; defaults to `n`.
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<BaseSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<StochasticMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_holder: Option<usize>,
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    fn topology(&self) -> Result<Topology> {
        self.graph
            .as_ref()
            .ok_or_else(|| Error::Config(format!("chain type {:?} needs a graph", self.kind)))?
            .build()
    }

    /// Checks everything that can be checked without sampling.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::GammaOutOfRange(self.gamma));
        }
        if self.b == Some(0) {
            return Err(Error::Config("B must be at least 1".into()));
        }
        self.build(0).map(|_| ())
    }

    pub fn n(&self) -> Result<usize> {
        Ok(self.build(0)?.n())
    }

    /// The connectivity window `B`, defaulting to the agent count.
    pub fn window(&self) -> Result<usize> {
        match self.b {
            Some(b) => Ok(b),
            None => self.n(),
        }
    }

    /// Builds the chain on random stream `stream` of this spec's seed.
    pub fn build(&self, stream: u64) -> Result<BoxedChain> {
        self.build_seeded(self.seed, stream)
    }

    pub fn build_seeded(&self, seed: u64, stream: u64) -> Result<BoxedChain> {
        let rng = stream_rng(seed, stream);
        Ok(match self.kind {
            ChainKind::Token => {
                let holder = self.initial_holder.unwrap_or(0);
                Box::new(TokenChain::new(self.topology()?, holder, rng)?)
            }
            ChainKind::Gossip => Box::new(GossipChain::new(self.topology()?, rng)?),
            ChainKind::LinkFailure => {
                let base = match (&self.base, &self.graph) {
                    (Some(list), _) => list.iter().map(BaseSpec::build).collect::<Result<_>>()?,
                    (None, Some(g)) => vec![g.build()?.metropolis()],
                    (None, None) => {
                        return Err(Error::Config("link_failure needs a base or a graph".into()))
                    }
                };
                let p = self
                    .p
                    .clone()
                    .ok_or_else(|| Error::Config("link_failure needs p".into()))?;
                Box::new(LinkFailureChain::new(base, p, rng)?)
            }
            ChainKind::Static => {
                let a = match (&self.matrix, &self.graph) {
                    (Some(m), _) => m.clone(),
                    (None, Some(g)) => g.build()?.metropolis(),
                    (None, None) => {
                        return Err(Error::Config("static needs a matrix or a graph".into()))
                    }
                };
                Box::new(static_chain(a))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_token_spec() {
        let spec = ChainSpec::from_json(
            r#"{"type":"token","graph":{"kind":"cycle","n":5},"seed":3,"gamma":0.01,"B":5}"#,
        )
        .unwrap();
        assert_eq!(spec.kind, ChainKind::Token);
        assert_eq!(spec.window().unwrap(), 5);
        let chain = spec.build(0).unwrap();
        assert_eq!(chain.name(), "token");
        assert_eq!(chain.n(), 5);
    }

    #[test]
    fn parses_link_failure_with_mixed_base() {
        let spec = ChainSpec::from_json(
            r#"{"type":"link_failure","p":[0.3,0.1],
                "base":[{"kind":"edges","n":3,"edges":[[0,1]]},[[0.5,0.5,0],[0.5,0.5,0],[0,0,1]]]}"#,
        )
        .unwrap();
        assert_eq!(spec.p, Some(FailureSchedule::Cyclic(vec![0.3, 0.1])));
        assert_eq!(spec.build(1).unwrap().n(), 3);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ChainSpec::from_json(r#"{"type":"token","graph":{"kind":"cycle","n":5},"colour":1}"#).is_err());
        assert!(ChainSpec::from_json(r#"{"type":"token","graph":{"kind":"cycle","n":5,"x":1}}"#).is_err());
        assert!(ChainSpec::from_json(r#"{"type":"token"}"#).is_err());
        assert!(ChainSpec::from_json(r#"{"type":"token","graph":{"kind":"cycle","n":5},"gamma":1.5}"#).is_err());
        assert!(ChainSpec::from_json(
            r#"{"type":"link_failure","graph":{"kind":"cycle","n":5},"p":1.0}"#
        )
        .is_err());
    }

    #[test]
    fn same_stream_replays() {
        let spec = ChainSpec::from_json(r#"{"type":"gossip","graph":{"kind":"complete","n":4},"seed":11}"#).unwrap();
        let mut a = spec.build(2).unwrap();
        let mut b = spec.build(2).unwrap();
        for _ in 0..50 {
            assert_eq!(a.next_matrix(), b.next_matrix());
        }
    }
}
