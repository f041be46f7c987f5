//! Interbank network topologies and their structural measures.
//!
//! Every edge is a two-way lending relationship, so a [`Topology`] is an
//! undirected simple graph. Nodes are numbered `1..=n` at every public
//! boundary (constructors, edge lists, cut points); storage is zero-based.

mod enumerate;
mod named;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg;

pub use enumerate::{canonical_code, enumerate_connected_topologies, MAX_ENUMERATION_NODES};
pub use named::{named_topologies, named_topology, NamedTopology};

/// PageRank damping used throughout the experiments.
pub const DEFAULT_ALPHA: f64 = 0.85;
/// PageRank additive constant used throughout the experiments.
pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("network needs at least one bank")]
    NoBanks,
    #[error("node {node} is out of range 1..={n_banks}")]
    NodeOutOfRange { node: usize, n_banks: usize },
    #[error("self-loop on node {0}: banks do not lend to themselves")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node {0} is isolated (zero out-degree)")]
    IsolatedNode(usize),
    #[error("graph has no edges")]
    NoEdges,
    #[error("alpha must lie in [0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("linear system for PageRank is singular")]
    Singular,
    #[error("enumeration supports at most {max} nodes, got {n}")]
    TooManyNodes { n: usize, max: usize },
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Undirected simple graph on `n_banks` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    n_banks: usize,
    adjacency: Vec<u8>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from 1-indexed unordered node pairs.
    pub fn new(n_banks: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n_banks == 0 {
            return Err(GraphError::NoBanks);
        }
        let mut adjacency = vec![0u8; n_banks * n_banks];
        for &(i, j) in edges {
            for node in [i, j] {
                if node == 0 || node > n_banks {
                    return Err(GraphError::NodeOutOfRange { node, n_banks });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            let (a, b) = (i - 1, j - 1);
            if adjacency[a * n_banks + b] != 0 {
                return Err(GraphError::DuplicateEdge(i.min(j), i.max(j)));
            }
            adjacency[a * n_banks + b] = 1;
            adjacency[b * n_banks + a] = 1;
        }
        Ok(Self::from_adjacency_unchecked(n_banks, adjacency))
    }

    pub(crate) fn from_adjacency_unchecked(n_banks: usize, adjacency: Vec<u8>) -> Self {
        let neighbors = (0..n_banks)
            .map(|i| (0..n_banks).filter(|&j| adjacency[i * n_banks + j] != 0).collect())
            .collect();
        Self {
            n_banks,
            adjacency,
            neighbors,
        }
    }

    pub fn empty(n_banks: usize) -> Result<Self, GraphError> {
        Self::new(n_banks, &[])
    }

    pub fn complete(n_banks: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..=n_banks)
            .flat_map(|i| ((i + 1)..=n_banks).map(move |j| (i, j)))
            .collect();
        Self::new(n_banks, &edges)
    }

    /// Star with node 1 as the hub.
    pub fn star(n_banks: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (2..=n_banks).map(|j| (1, j)).collect();
        Self::new(n_banks, &edges)
    }

    pub fn n_banks(&self) -> usize {
        self.n_banks
    }

    /// Adjacency entry for zero-based nodes.
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n_banks + j] != 0
    }

    /// Row-major `n × n` 0/1 adjacency matrix.
    pub fn adjacency(&self) -> &[u8] {
        &self.adjacency
    }

    /// Zero-based neighbours of zero-based node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// 1-indexed edges with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_banks;
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_edge(i, j))
            .map(|(i, j)| (i + 1, j + 1))
            .collect()
    }

    /// Degree sequence sorted in non-increasing order.
    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut d = self.degrees();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d
    }

    /// True iff every node is reachable from node 1.
    pub fn is_connected(&self) -> bool {
        self.reachable_count(None) == self.n_banks
    }

    /// Nodes reachable from the first non-removed node, skipping `removed`.
    fn reachable_count(&self, removed: Option<usize>) -> usize {
        let start = match (0..self.n_banks).find(|&v| Some(v) != removed) {
            Some(s) => s,
            None => return 0,
        };
        let mut seen = vec![false; self.n_banks];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] && Some(w) != removed {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count
    }

    /// Solves `y = alpha * A D^-1 y + beta` directly.
    pub fn pagerank(&self, alpha: f64, beta: f64) -> Result<CentralityScores, GraphError> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(GraphError::InvalidAlpha(alpha));
        }
        let n = self.n_banks;
        if let Some(i) = (0..n).find(|&i| self.degree(i) == 0) {
            return Err(GraphError::IsolatedNode(i + 1));
        }
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
            for &j in &self.neighbors[i] {
                m[i * n + j] -= alpha / self.degree(j) as f64;
            }
        }
        let mut y = vec![beta; n];
        if !linalg::solve_in_place(&mut m, &mut y, n) {
            return Err(GraphError::Singular);
        }
        Ok(CentralityScores {
            pagerank: y,
            degree: self.degrees(),
            alpha,
            beta,
        })
    }

    /// Link-share concentration measures (Shannon entropy in nats and HHI).
    pub fn fragility(&self, weighting: ShareWeighting) -> Result<FragilityMeasures, GraphError> {
        let raw: Vec<f64> = match weighting {
            ShareWeighting::Degree => {
                if self.n_edges() == 0 {
                    return Err(GraphError::NoEdges);
                }
                self.degrees().into_iter().map(|d| d as f64).collect()
            }
            ShareWeighting::PageRank => self.pagerank(DEFAULT_ALPHA, DEFAULT_BETA)?.pagerank,
        };
        Ok(FragilityMeasures::from_weights(&raw))
    }

    /// Articulation points, 1-indexed and ascending.
    pub fn cut_points(&self) -> Vec<usize> {
        let n = self.n_banks;
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut is_cut = vec![false; n];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] == usize::MAX {
                self.low_link(root, None, &mut timer, &mut disc, &mut low, &mut is_cut);
            }
        }
        (0..n).filter(|&v| is_cut[v]).map(|v| v + 1).collect()
    }

    fn low_link(
        &self,
        v: usize,
        parent: Option<usize>,
        timer: &mut usize,
        disc: &mut [usize],
        low: &mut [usize],
        is_cut: &mut [bool],
    ) {
        disc[v] = *timer;
        low[v] = *timer;
        *timer += 1;
        let mut children = 0;
        for &w in &self.neighbors[v] {
            if Some(w) == parent {
                continue;
            }
            if disc[w] == usize::MAX {
                children += 1;
                self.low_link(w, Some(v), timer, disc, low, is_cut);
                low[v] = low[v].min(low[w]);
                if parent.is_some() && low[w] >= disc[v] {
                    is_cut[v] = true;
                }
            } else {
                low[v] = low[v].min(disc[w]);
            }
        }
        if parent.is_none() && children > 1 {
            is_cut[v] = true;
        }
    }

    /// Relabels nodes: node `i` (0-based) becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Topology {
        let n = self.n_banks;
        assert_eq!(perm.len(), n);
        let mut adjacency = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                adjacency[perm[i] * n + perm[j]] = self.adjacency[i * n + j];
            }
        }
        Topology::from_adjacency_unchecked(n, adjacency)
    }

    /// Plain-text edge list: `N` on the first line, then one `i j` per line.
    pub fn to_edge_list(&self) -> String {
        self.to_string()
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            message: "missing node count".into(),
        })?;
        let n_banks: usize = header.parse().map_err(|_| GraphError::Parse {
            line,
            message: format!("expected node count, found {header:?}"),
        })?;
        let mut edges = Vec::new();
        for (line, content) in lines {
            let fields: Vec<&str> = content.split_whitespace().collect();
            let parsed: Option<(usize, usize)> = match fields.as_slice() {
                [a, b] => a.parse().ok().zip(b.parse().ok()),
                _ => None,
            };
            let pair = parsed.ok_or_else(|| GraphError::Parse {
                line,
                message: format!("expected `i j`, found {content:?}"),
            })?;
            edges.push(pair);
        }
        Topology::new(n_banks, &edges)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.n_banks)?;
        for (i, j) in self.edges() {
            writeln!(f, "{i} {j}")?;
        }
        Ok(())
    }
}

impl FromStr for Topology {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topology::parse_edge_list(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityScores {
    pub pagerank: Vec<f64>,
    pub degree: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
}

/// What a node's share of the network is measured by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShareWeighting {
    Degree,
    PageRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragilityMeasures {
    pub entropy: f64,
    pub hhi: f64,
    pub link_shares: Vec<f64>,
}

impl FragilityMeasures {
    fn from_weights(raw: &[f64]) -> Self {
        let total: f64 = raw.iter().sum();
        let link_shares: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let entropy = -link_shares
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>();
        let hhi = link_shares.iter().map(|p| p * p).sum();
        Self {
            entropy: entropy.max(0.0),
            hhi,
            link_shares,
        }
    }
}
