use crate::rng::{self, GRAPH_DOMAIN};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge probability {0} is not in [0, 1]")]
    InvalidProbability(f64),
    #[error("graph needs at least one node")]
    Empty,
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("self loop on node {0}")]
    SelfLoop(usize),
}

/// Undirected simple contact graph. Edges are stored as `(i, j)` with `i < j`,
/// sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut out = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::NodeOutOfRange(a, b, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self { n, edges: out })
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Samples G(n, p).
    ///
    /// Pairs are visited in lexicographic order `(0,1), (0,2), .., (0,n-1), (1,2), ..`;
    /// each draws one `f64` uniform in [0, 1) (53-bit, `rand` standard
    /// distribution) from the graph-domain ChaCha20 stream 0 and the edge is kept
    /// iff the draw is `< p`.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self, GraphError> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(GraphError::InvalidProbability(p));
        }
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut rng = rng::stream(seed, GRAPH_DOMAIN, 0);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let u: f64 = rng.random();
                if u < p {
                    edges.push((i, j));
                }
            }
        }
        Ok(Self { n, edges })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_complete_extremes() {
        let g = Graph::erdos_renyi(5, 0.0, 1).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edge_count(), 0);
        let k4 = Graph::erdos_renyi(4, 1.0, 1).unwrap();
        assert_eq!(k4.edge_count(), 6);
        assert_eq!(k4, Graph::complete(4).unwrap());
    }

    #[test]
    fn rejects_bad_probability() {
        assert_eq!(Graph::erdos_renyi(3, 1.5, 0), Err(GraphError::InvalidProbability(1.5)));
        assert!(Graph::erdos_renyi(3, -0.1, 0).is_err());
        assert!(Graph::erdos_renyi(3, f64::NAN, 0).is_err());
    }

    #[test]
    fn hundred_node_sample_is_concentrated() {
        // C(100,2) = 4950 pairs at p = 0.2: mean 990, sd ~ 28.1; 4 sd window.
        let g = Graph::erdos_renyi(100, 0.2, 42).unwrap();
        let m = g.edge_count() as f64;
        assert!((990.0 - 4.0 * 28.15..=990.0 + 4.0 * 28.15).contains(&m), "edges {m}");
        assert_eq!(g, Graph::erdos_renyi(100, 0.2, 42).unwrap());
        assert_ne!(g, Graph::erdos_renyi(100, 0.2, 43).unwrap());
    }

    #[test]
    fn sampled_edges_match_direct_enumeration() {
        let (n, p, seed) = (30, 0.3, 9);
        let mut rng = rng::stream(seed, GRAPH_DOMAIN, 0);
        let mut expected = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    expected.push((i, j));
                }
            }
        }
        assert_eq!(Graph::erdos_renyi(n, p, seed).unwrap().edges(), &expected[..]);
    }

    #[test]
    fn explicit_edges_are_normalized() {
        let g = Graph::new(3, [(2, 0), (0, 2), (1, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2), (1, 2)]);
        assert_eq!(Graph::new(3, [(0, 3)]), Err(GraphError::NodeOutOfRange(0, 3, 3)));
        assert_eq!(Graph::new(3, [(1, 1)]), Err(GraphError::SelfLoop(1)));
    }
}
