//! Connected finite graphs, vertex functions and the discrete p-Laplacian.
//!
//! Edges carry unit weight and every vertex carries unit measure, so
//! integrals over the vertex set are plain sums.

mod operators;
mod poincare;

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use operators::{
    diameter_path_length, edge_flux, equal_value_threshold, f_weighted_mean, gradient_p_energy,
    integral, integration_by_parts_check, mean, p_laplacian,
};
pub use poincare::{poincare_constant, PoincareMode, POINCARE_SAFETY};

pub(crate) use operators::{gradient_p_energy_raw, p_laplacian_into};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a graph needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("vertex index {index} out of range for {vertex_count} vertices")]
    VertexOutOfRange { index: usize, vertex_count: usize },
    #[error("graph not connected")]
    NotConnected,
    #[error("dimension mismatch: graph has {expected} vertices, function has {found} values")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at vertex {0}")]
    NonFinite(usize),
    #[error("exponent p must be a finite real > 1, got {0}")]
    InvalidExponent(f64),
    #[error("degenerate weight: the weight function integrates to zero")]
    DegenerateWeight,
    #[error("Poincare constant estimate did not converge (best ratio found {best})")]
    PoincareNotConverged { best: f64 },
}

/// Connected, undirected, simple graph on vertices `0..vertex_count`.
///
/// Neighbor lists are sorted so every sum over the graph runs in the same
/// order for a given input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    adjacency: Vec<Vec<usize>>,
    /// Each undirected edge once, as `(i, j)` with `i < j`, sorted.
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if vertex_count < 2 {
            return Err(GraphError::TooFewVertices(vertex_count));
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut canonical = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            for index in [i, j] {
                if index >= vertex_count {
                    return Err(GraphError::VertexOutOfRange {
                        index,
                        vertex_count,
                    });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            canonical.push((i.min(j), i.max(j)));
        }
        canonical.sort_unstable();
        for w in canonical.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        for &(i, j) in &canonical {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let graph = Graph {
            vertex_count,
            adjacency,
            edges: canonical,
        };
        if !graph.is_connected() {
            return Err(GraphError::NotConnected);
        }
        Ok(graph)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges)
    }

    /// Random connected graph: a random recursive tree (vertex `i` attached
    /// to a uniform earlier vertex) plus every other pair with probability
    /// `extra_edge_prob`. Deterministic in `seed`.
    pub fn random_connected(n: usize, extra_edge_prob: f64, seed: u64) -> Result<Self, GraphError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 1..n {
            edges.push((rng.random_range(0..i), i));
        }
        for i in 0..n {
            for j in i + 1..n {
                let extra = rng.random_bool(extra_edge_prob.clamp(0.0, 1.0));
                if extra && !edges.contains(&(i, j)) {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    /// BFS distances from `source`; `usize::MAX` marks unreachable vertices.
    pub fn bfs_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex_count];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(x) = queue.pop_front() {
            for &y in &self.adjacency[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(|&d| d != usize::MAX)
    }

    pub(crate) fn check_dim(&self, u: &VertexFunction) -> Result<(), GraphError> {
        if u.len() != self.vertex_count {
            return Err(GraphError::DimensionMismatch {
                expected: self.vertex_count,
                found: u.len(),
            });
        }
        Ok(())
    }
}

/// A real value per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VertexFunction(Vec<f64>);

impl VertexFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, GraphError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GraphError::NonFinite(i));
        }
        Ok(VertexFunction(values))
    }

    pub fn constant(n: usize, value: f64) -> Self {
        VertexFunction(vec![value; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    /// Wraps values produced by trusted arithmetic; callers check finiteness
    /// where the values can overflow.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        VertexFunction(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &VertexFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> VertexFunction {
        VertexFunction(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl Deref for VertexFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for VertexFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for VertexFunction {
    type Error = GraphError;
    fn try_from(values: Vec<f64>) -> Result<Self, GraphError> {
        VertexFunction::new(values)
    }
}

impl From<VertexFunction> for Vec<f64> {
    fn from(u: VertexFunction) -> Vec<f64> {
        u.0
    }
}

impl fmt::Display for VertexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// The exponent `p > 1` together with its real conjugate `q = p/(p-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponent {
    p: f64,
    q: f64,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self, GraphError> {
        if !p.is_finite() || p <= 1.0 {
            return Err(GraphError::InvalidExponent(p));
        }
        Ok(Exponent {
            p,
            q: p / (p - 1.0),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `p < 2`: the edge flux has infinite slope at zero difference.
    pub fn is_singular(&self) -> bool {
        self.p < 2.0
    }
}
