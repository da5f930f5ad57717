//! Threshold graphs of weight matrices, rooted-tree connectivity, and the
//! undirected communication topologies that chains are built on.
//!
//! Vertices are 0-based. A directed edge `(j, i)` means information flows
//! from `j` to `i`, matching `a_ij > gamma` in the weight matrix.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::StochasticMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (j, i) in edges {
            if j >= n || i >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({j}, {i}) outside vertex set of size {n}"
                )));
            }
            g.edges.insert((j, i));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn contains(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    fn out_neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(j, i) in &self.edges {
            adj[j].push(i);
        }
        adj
    }
}

/// The edge set `{(j, i) : a_ij > gamma}`; ties at exactly `gamma` are excluded.
pub fn graph_of(a: &StochasticMatrix, gamma: f64) -> Result<DirectedGraph> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let n = a.n();
    let mut g = DirectedGraph::empty(n);
    for i in 0..n {
        for j in 0..n {
            if a.get(i, j) > gamma {
                g.edges.insert((j, i));
            }
        }
    }
    Ok(g)
}

pub fn union_graphs<'a>(graphs: impl IntoIterator<Item = &'a DirectedGraph>) -> Result<DirectedGraph> {
    let mut iter = graphs.into_iter();
    let Some(first) = iter.next() else {
        return Err(Error::InvalidArgument("union of an empty list".into()));
    };
    let mut out = first.clone();
    for g in iter {
        if g.n != out.n {
            return Err(Error::dims(out.n, g.n));
        }
        out.edges.extend(g.edges.iter().copied());
    }
    Ok(out)
}

/// Whether some vertex reaches every vertex along directed edges.
///
/// Decided exactly by a breadth-first search from each candidate root.
pub fn has_spanning_rooted_tree(g: &DirectedGraph) -> bool {
    spanning_root(g).is_some()
}

/// The smallest vertex that reaches all others, if any.
pub fn spanning_root(g: &DirectedGraph) -> Option<usize> {
    let adj = g.out_neighbours();
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::new();
    (0..g.n).find(|&root| {
        seen.iter_mut().for_each(|s| *s = false);
        seen[root] = true;
        queue.clear();
        queue.push_back(root);
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == g.n
    })
}

/// A simple undirected graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds from an undirected edge list. Self-loops and duplicates
    /// (in either orientation) are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("no vertices".into()));
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        let mut list = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) outside vertex set of size {n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at {a}")));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
            list.push(key);
        }
        adjacency.iter_mut().for_each(|v| v.sort_unstable());
        Ok(Self {
            n,
            edges: list,
            adjacency,
        })
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph("a cycle needs at least 3 vertices".into()));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// Metropolis–Hastings weights `w_ij = 1 / (1 + max(d_i, d_j))` on edges,
    /// remaining mass on the diagonal. Symmetric, hence doubly stochastic;
    /// isolated vertices get identity rows.
    pub fn metropolis(&self) -> StochasticMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for &(a, b) in &self.edges {
            let w = 1.0 / (1.0 + self.degree(a).max(self.degree(b)) as f64);
            data[a * n + b] = w;
            data[b * n + a] = w;
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| data[i * n + j]).sum();
            data[i * n + i] = 1.0 - off;
        }
        StochasticMatrix::from_flat_unchecked(n, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> StochasticMatrix {
        StochasticMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn graph_of_examples() {
        let g = graph_of(&StochasticMatrix::identity(3), 0.5).unwrap();
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 0), (1, 1), (2, 2)]);

        let g = graph_of(&StochasticMatrix::uniform(3), 0.5).unwrap();
        assert!(g.edges().is_empty());

        let g = graph_of(&m(&[&[0.6, 0.4], &[0.4, 0.6]]), 0.5).unwrap();
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);

        // strict threshold: entry exactly gamma is excluded
        let g = graph_of(&m(&[&[0.5, 0.5], &[0.0, 1.0]]), 0.5).unwrap();
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(1, 1)]);

        for gamma in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                graph_of(&StochasticMatrix::identity(2), gamma),
                Err(Error::GammaOutOfRange(_))
            ));
        }
    }

    #[test]
    fn union_examples() {
        let g = DirectedGraph::from_edges(3, [(0, 1), (2, 2)]).unwrap();
        assert_eq!(union_graphs([&g, &g]).unwrap(), g);
        assert_eq!(union_graphs([&g, &DirectedGraph::empty(3)]).unwrap(), g);

        let a = DirectedGraph::from_edges(3, [(0, 1)]).unwrap();
        let b = DirectedGraph::from_edges(3, [(1, 2)]).unwrap();
        let u = union_graphs([&a, &b]).unwrap();
        assert_eq!(u.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);

        assert!(union_graphs([&a, &DirectedGraph::empty(4)]).is_err());
    }

    #[test]
    fn rooted_tree_examples() {
        assert!(has_spanning_rooted_tree(&DirectedGraph::empty(1)));
        let path = DirectedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(spanning_root(&path), Some(0));
        assert!(!has_spanning_rooted_tree(&DirectedGraph::empty(2)));

        // two sources: 0 -> 2 and 1 -> 2, nobody reaches both 0 and 1
        let v = DirectedGraph::from_edges(3, [(0, 2), (1, 2)]).unwrap();
        assert!(!has_spanning_rooted_tree(&v));
    }

    #[test]
    fn topology_construction() {
        let c5 = Topology::cycle(5).unwrap();
        assert!(c5.is_connected());
        assert_eq!(c5.neighbours(0), &[1, 4]);
        assert!(Topology::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Topology::from_edges(3, &[(0, 0)]).is_err());
        assert!(!Topology::from_edges(3, &[(0, 1)]).unwrap().is_connected());

        let w = c5.metropolis();
        assert!(w.is_doubly_stochastic(1e-12));
        assert!((w.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }
}
