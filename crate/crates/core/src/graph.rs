//! Finite weighted bipartite graphs, the source objects of every pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Optional per-vertex weights for both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexWeights {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// A finite bipartite graph with nonnegative edge weights (1/0 for simple
/// graphs) and optional vertex weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBipartiteGraph", into = "RawBipartiteGraph")]
pub struct BipartiteGraph {
    left_count: usize,
    right_count: usize,
    edge_weights: Matrix,
    vertex_weights: Option<VertexWeights>,
}

#[derive(Serialize, Deserialize)]
struct RawBipartiteGraph {
    left_count: usize,
    right_count: usize,
    edge_weights: Vec<Vec<f64>>,
    #[serde(default)]
    vertex_weights: Option<VertexWeights>,
}

impl TryFrom<RawBipartiteGraph> for BipartiteGraph {
    type Error = Error;

    fn try_from(raw: RawBipartiteGraph) -> Result<Self> {
        let m = Matrix::from_rows(raw.edge_weights)?;
        BipartiteGraph::with_vertex_weights(raw.left_count, raw.right_count, m, raw.vertex_weights)
    }
}

impl From<BipartiteGraph> for RawBipartiteGraph {
    fn from(g: BipartiteGraph) -> Self {
        RawBipartiteGraph {
            left_count: g.left_count,
            right_count: g.right_count,
            edge_weights: g.edge_weights.to_rows(),
            vertex_weights: g.vertex_weights,
        }
    }
}

impl BipartiteGraph {
    pub fn new(left_count: usize, right_count: usize, edge_weights: Matrix) -> Result<Self> {
        Self::with_vertex_weights(left_count, right_count, edge_weights, None)
    }

    pub fn with_vertex_weights(
        left_count: usize,
        right_count: usize,
        edge_weights: Matrix,
        vertex_weights: Option<VertexWeights>,
    ) -> Result<Self> {
        if left_count == 0 || right_count == 0 {
            return Err(Error::invalid("both vertex sides must be nonempty"));
        }
        if edge_weights.rows() != left_count || edge_weights.cols() != right_count {
            return Err(Error::invalid(format!(
                "edge weight matrix is {}x{}, expected {}x{}",
                edge_weights.rows(),
                edge_weights.cols(),
                left_count,
                right_count
            )));
        }
        if !edge_weights.all_finite() {
            return Err(Error::invalid("edge weights must be finite"));
        }
        if edge_weights.data().iter().any(|&w| w < 0.0) {
            return Err(Error::invalid("edge weights must be nonnegative"));
        }
        if let Some(vw) = &vertex_weights {
            if vw.left.len() != left_count || vw.right.len() != right_count {
                return Err(Error::invalid("vertex weight lengths do not match sides"));
            }
            if vw
                .left
                .iter()
                .chain(&vw.right)
                .any(|&w| !w.is_finite() || w < 0.0)
            {
                return Err(Error::invalid(
                    "vertex weights must be nonnegative and finite",
                ));
            }
        }
        Ok(BipartiteGraph {
            left_count,
            right_count,
            edge_weights,
            vertex_weights,
        })
    }

    /// Simple 0/1 graph from an edge list.
    pub fn from_edges(left_count: usize, right_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut m = Matrix::zeros(left_count, right_count);
        for &(i, j) in edges {
            if i >= left_count || j >= right_count {
                return Err(Error::invalid(format!("edge ({i},{j}) out of range")));
            }
            m.set(i, j, 1.0);
        }
        Self::new(left_count, right_count, m)
    }

    /// Simple 0/1 graph defined by a predicate on vertex pairs.
    pub fn from_predicate(
        left_count: usize,
        right_count: usize,
        mut pred: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let m = Matrix::from_fn(left_count, right_count, |i, j| {
            if pred(i, j) {
                1.0
            } else {
                0.0
            }
        });
        Self::new(left_count, right_count, m)
    }

    pub fn left_count(&self) -> usize {
        self.left_count
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }

    pub fn edge_weights(&self) -> &Matrix {
        &self.edge_weights
    }

    pub fn vertex_weights(&self) -> Option<&VertexWeights> {
        self.vertex_weights.as_ref()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.edge_weights.get(i, j)
    }

    /// Number of nonzero edge weights.
    pub fn edge_count(&self) -> usize {
        self.edge_weights.data().iter().filter(|&&w| w != 0.0).count()
    }

    /// True when every edge weight is exactly 0 or 1.
    pub fn is_simple(&self) -> bool {
        self.edge_weights
            .data()
            .iter()
            .all(|&w| w == 0.0 || w == 1.0)
    }

    /// Row weight sums w_i.
    pub fn left_strengths(&self) -> Vec<f64> {
        (0..self.left_count)
            .map(|i| self.edge_weights.row(i).iter().sum())
            .collect()
    }

    /// Column weight sums w_j.
    pub fn right_strengths(&self) -> Vec<f64> {
        (0..self.right_count)
            .map(|j| (0..self.left_count).map(|i| self.weight(i, j)).sum())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("graph JSON: {e}")))
    }
}
