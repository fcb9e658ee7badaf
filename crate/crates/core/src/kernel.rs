//! Stepfunction kernels on the unit square and their operation algebra.
//!
//! A [`StepKernel`] is a function on the unit square, constant on each cell of
//! a product of two finite interval partitions. Partitions are stored as
//! measure sequences only; interval positions are the implied cumulative
//! sums, and every operation here is invariant under that convention.
//! All values are immutable after construction and all operations are pure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::matrix::Matrix;

/// Absolute tolerance for "measures sum to one".
pub const MEASURE_SUM_TOL: f64 = 1e-9;
/// Tolerance for merging cumulative breakpoints during refinement.
pub const BREAKPOINT_TOL: f64 = 1e-12;

/// Which side of a bipartite object an operation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Row,
    Column,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepKernel", into = "RawStepKernel")]
pub struct StepKernel {
    row_measures: Vec<f64>,
    col_measures: Vec<f64>,
    values: Matrix,
}

#[derive(Serialize, Deserialize)]
struct RawStepKernel {
    row_measures: Vec<f64>,
    col_measures: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawStepKernel> for StepKernel {
    type Error = Error;

    fn try_from(raw: RawStepKernel) -> Result<Self> {
        StepKernel::new(raw.row_measures, raw.col_measures, Matrix::from_rows(raw.values)?)
    }
}

impl From<StepKernel> for RawStepKernel {
    fn from(k: StepKernel) -> Self {
        RawStepKernel {
            row_measures: k.row_measures,
            col_measures: k.col_measures,
            values: k.values.to_rows(),
        }
    }
}

fn check_measures(m: &[f64], what: &str) -> Result<()> {
    if m.is_empty() {
        return Err(Error::invalid(format!("{what} must be nonempty")));
    }
    for (i, &x) in m.iter().enumerate() {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::invalid(format!(
                "{what}[{i}] = {x} must be a positive finite real"
            )));
        }
    }
    let sum: f64 = m.iter().sum();
    if (sum - 1.0).abs() > MEASURE_SUM_TOL {
        return Err(Error::invalid(format!(
            "{what} sum to {sum}, expected 1 within {MEASURE_SUM_TOL:e}"
        )));
    }
    Ok(())
}

impl StepKernel {
    /// Validating constructor. Measures must be positive and sum to one
    /// within [`MEASURE_SUM_TOL`]; all values must be finite.
    pub fn new(row_measures: Vec<f64>, col_measures: Vec<f64>, values: Matrix) -> Result<Self> {
        check_measures(&row_measures, "row measures")?;
        check_measures(&col_measures, "column measures")?;
        if values.rows() != row_measures.len() || values.cols() != col_measures.len() {
            return Err(Error::invalid(format!(
                "value matrix is {}x{}, expected {}x{}",
                values.rows(),
                values.cols(),
                row_measures.len(),
                col_measures.len()
            )));
        }
        if !values.all_finite() {
            return Err(Error::invalid("kernel values must be finite"));
        }
        Ok(StepKernel {
            row_measures,
            col_measures,
            values,
        })
    }

    /// The 1x1 kernel of constant value `c`.
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::invalid(format!("constant value {c} is not finite")));
        }
        let mut values = Matrix::zeros(1, 1);
        values.set(0, 0, c);
        StepKernel::new(vec![1.0], vec![1.0], values)
    }

    /// Graph-to-kernel conversion giving every vertex the same measure;
    /// block values are the edge weights. This is the default conversion
    /// in all pipelines.
    pub fn from_graph_uniform(g: &BipartiteGraph) -> Result<Self> {
        let m = g.left_count();
        let n = g.right_count();
        StepKernel::new(
            vec![1.0 / m as f64; m],
            vec![1.0 / n as f64; n],
            g.edge_weights().clone(),
        )
    }

    /// Graph-to-kernel conversion where the measure of a vertex is its
    /// share of the total edge weight on its side. Rejects vertices of
    /// zero weight, which would produce a zero-measure step.
    pub fn from_graph_weighted(g: &BipartiteGraph) -> Result<Self> {
        let left = g.left_strengths();
        let right = g.right_strengths();
        let total: f64 = left.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("graph has zero total edge weight"));
        }
        for (i, &w) in left.iter().enumerate() {
            if w <= 0.0 {
                return Err(Error::invalid(format!(
                    "left vertex {i} is isolated (weight sum 0)"
                )));
            }
        }
        for (j, &w) in right.iter().enumerate() {
            if w <= 0.0 {
                return Err(Error::invalid(format!(
                    "right vertex {j} is isolated (weight sum 0)"
                )));
            }
        }
        StepKernel::new(
            left.iter().map(|w| w / total).collect(),
            right.iter().map(|w| w / total).collect(),
            g.edge_weights().clone(),
        )
    }

    pub fn row_measures(&self) -> &[f64] {
        &self.row_measures
    }

    pub fn col_measures(&self) -> &[f64] {
        &self.col_measures
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row_steps(&self) -> usize {
        self.row_measures.len()
    }

    pub fn col_steps(&self) -> usize {
        self.col_measures.len()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// All values in the unit interval.
    pub fn is_graphon(&self) -> bool {
        self.values.data().iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// All values in [-1,1].
    pub fn is_w1(&self) -> bool {
        self.values.data().iter().all(|&v| (-1.0..=1.0).contains(&v))
    }

    /// W*(x,y) = W(y,x).
    pub fn transpose(&self) -> StepKernel {
        StepKernel {
            row_measures: self.col_measures.clone(),
            col_measures: self.row_measures.clone(),
            values: self.values.transpose(),
        }
    }

    /// Re-expresses both kernels on the common refinement of their row and
    /// column partitions. The outputs are equal to the inputs as functions
    /// on the unit square.
    pub fn common_refinement(&self, other: &StepKernel) -> (StepKernel, StepKernel) {
        let rows = refine_measures(&self.row_measures, &other.row_measures);
        let cols = refine_measures(&self.col_measures, &other.col_measures);
        let expand = |k: &StepKernel, ridx: &[usize], cidx: &[usize]| {
            let values = Matrix::from_fn(rows.measures.len(), cols.measures.len(), |i, j| {
                k.values.get(ridx[i], cidx[j])
            });
            StepKernel {
                row_measures: rows.measures.clone(),
                col_measures: cols.measures.clone(),
                values,
            }
        };
        (
            expand(self, &rows.first_index, &cols.first_index),
            expand(other, &rows.second_index, &cols.second_index),
        )
    }

    /// Pointwise product (UW)(x,y) = U(x,y)W(x,y) on the common refinement.
    pub fn product(&self, other: &StepKernel) -> StepKernel {
        let (a, b) = self.common_refinement(other);
        let values = Matrix::from_fn(a.row_steps(), a.col_steps(), |i, j| {
            a.value(i, j) * b.value(i, j)
        });
        StepKernel {
            row_measures: a.row_measures,
            col_measures: a.col_measures,
            values,
        }
    }

    /// Pointwise difference on the common refinement.
    pub fn difference(&self, other: &StepKernel) -> StepKernel {
        let (a, b) = self.common_refinement(other);
        let values = Matrix::from_fn(a.row_steps(), a.col_steps(), |i, j| {
            a.value(i, j) - b.value(i, j)
        });
        StepKernel {
            row_measures: a.row_measures,
            col_measures: a.col_measures,
            values,
        }
    }

    /// Operator product (U o W)(x,y) = Int U(x,z) W(z,y) dz. The middle
    /// variable runs over the refinement of U's column partition with W's
    /// row partition; the result lives on (U rows) x (W columns).
    pub fn operator_product(&self, other: &StepKernel) -> StepKernel {
        let mid = refine_measures(&self.col_measures, &other.row_measures);
        let m = self.row_steps();
        let n = other.col_steps();
        let mut values = Matrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for (k, &mk) in mid.measures.iter().enumerate() {
                    acc += self.value(i, mid.first_index[k])
                        * other.value(mid.second_index[k], j)
                        * mk;
                }
                values.set(i, j, acc);
            }
        }
        StepKernel {
            row_measures: self.row_measures.clone(),
            col_measures: other.col_measures.clone(),
            values,
        }
    }

    /// The kernel operator action (T_W f)(x) = Int W(x,y) f(y) dy for a step
    /// function `f` on the column partition; returns a step function on the
    /// row partition.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.col_steps(), "step function lives on columns");
        (0..self.row_steps())
            .map(|i| {
                (0..self.col_steps())
                    .map(|j| self.value(i, j) * f[j] * self.col_measures[j])
                    .sum()
            })
            .collect()
    }

    /// Block-diagonal assembly: part `i` is scaled into an `a_i x b_i`
    /// rectangle and everything off the diagonal blocks is zero.
    pub fn direct_sum(parts: &[StepKernel], a: &[f64], b: &[f64]) -> Result<StepKernel> {
        if parts.is_empty() {
            return Err(Error::invalid("direct sum needs at least one part"));
        }
        if parts.len() != a.len() || parts.len() != b.len() {
            return Err(Error::invalid("weight sequences must match part count"));
        }
        check_measures(a, "direct sum row weights")?;
        check_measures(b, "direct sum column weights")?;
        let mut row_measures = Vec::new();
        let mut col_measures = Vec::new();
        for (idx, part) in parts.iter().enumerate() {
            row_measures.extend(part.row_measures.iter().map(|m| m * a[idx]));
            col_measures.extend(part.col_measures.iter().map(|m| m * b[idx]));
        }
        let mut values = Matrix::zeros(row_measures.len(), col_measures.len());
        let mut r0 = 0;
        let mut c0 = 0;
        for part in parts {
            for i in 0..part.row_steps() {
                for j in 0..part.col_steps() {
                    values.set(r0 + i, c0 + j, part.value(i, j));
                }
            }
            r0 += part.row_steps();
            c0 += part.col_steps();
        }
        StepKernel::new(row_measures, col_measures, values)
    }

    /// The symmetric kernel placing `W` on [0,1/2] x [1/2,1], its transpose
    /// on [1/2,1] x [0,1/2], and zero elsewhere. The output equals its own
    /// transpose.
    pub fn symmetrize(&self) -> StepKernel {
        let m = self.row_steps();
        let n = self.col_steps();
        let mut measures: Vec<f64> = Vec::with_capacity(m + n);
        measures.extend(self.row_measures.iter().map(|x| x / 2.0));
        measures.extend(self.col_measures.iter().map(|x| x / 2.0));
        let values = Matrix::from_fn(m + n, m + n, |i, j| {
            if i < m && j >= m {
                self.value(i, j - m)
            } else if i >= m && j < m {
                self.value(j, i - m)
            } else {
                0.0
            }
        });
        StepKernel {
            row_measures: measures.clone(),
            col_measures: measures,
            values,
        }
    }

    /// The five-fold alternating operator product
    /// W o W* o W o W* o W o W*, a square kernel on the row partition.
    pub fn sixth_power(&self) -> StepKernel {
        let t = self.transpose();
        self.operator_product(&t)
            .operator_product(self)
            .operator_product(&t)
            .operator_product(self)
            .operator_product(&t)
    }
}

/// Result of merging two measure sequences into their common refinement.
pub(crate) struct Refinement {
    /// Measures of the refined steps.
    pub measures: Vec<f64>,
    /// For each refined step, the index of the first input's step containing it.
    pub first_index: Vec<usize>,
    /// Likewise for the second input.
    pub second_index: Vec<usize>,
}

/// Merges the cumulative breakpoints of two measure sequences. Breakpoints
/// closer than [`BREAKPOINT_TOL`] are identified and refined steps of
/// measure below that tolerance are dropped.
pub(crate) fn refine_measures(a: &[f64], b: &[f64]) -> Refinement {
    let cum = |m: &[f64]| {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(m.len());
        for &x in m {
            acc += x;
            out.push(acc);
        }
        // Measures are validated to sum to 1 within tolerance; snapping the
        // final breakpoint makes both sequences share the exact endpoint.
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    };
    let ca = cum(a);
    let cb = cum(b);
    let mut measures = Vec::new();
    let mut first_index = Vec::new();
    let mut second_index = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0.0;
    while i < ca.len() && j < cb.len() {
        let (next, ni, nj) = if (ca[i] - cb[j]).abs() <= BREAKPOINT_TOL {
            (ca[i].max(cb[j]), i + 1, j + 1)
        } else if ca[i] < cb[j] {
            (ca[i], i + 1, j)
        } else {
            (cb[j], i, j + 1)
        };
        let step = next - prev;
        if step > BREAKPOINT_TOL {
            measures.push(step);
            first_index.push(i);
            second_index.push(j);
        }
        prev = next;
        i = ni;
        j = nj;
    }
    Refinement {
        measures,
        first_index,
        second_index,
    }
}

impl StepKernel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("kernel serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("kernel JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(rows: Vec<f64>, cols: Vec<f64>, values: Vec<Vec<f64>>) -> StepKernel {
        StepKernel::new(rows, cols, Matrix::from_rows(values).unwrap()).unwrap()
    }

    fn eye2() -> StepKernel {
        kernel(
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
    }

    #[test]
    fn constant_cases() {
        for c in [0.5, 0.0, 1.0] {
            let k = StepKernel::constant(c).unwrap();
            assert_eq!(k.row_steps(), 1);
            assert_eq!(k.value(0, 0), c);
        }
        assert!(StepKernel::constant(f64::NAN).is_err());
        assert!(StepKernel::constant(f64::INFINITY).is_err());
    }

    #[test]
    fn uniform_conversion() {
        let single = BipartiteGraph::from_edges(1, 1, &[(0, 0)]).unwrap();
        let k = StepKernel::from_graph_uniform(&single).unwrap();
        assert_eq!(k.row_measures(), &[1.0]);
        assert_eq!(k.value(0, 0), 1.0);

        let empty = BipartiteGraph::from_edges(2, 2, &[]).unwrap();
        let k = StepKernel::from_graph_uniform(&empty).unwrap();
        assert_eq!(k.row_measures(), &[0.5, 0.5]);
        assert_eq!(k.values().max_abs(), 0.0);

        let g = BipartiteGraph::from_edges(2, 1, &[(0, 0)]).unwrap();
        let k = StepKernel::from_graph_uniform(&g).unwrap();
        assert_eq!(k.row_measures(), &[0.5, 0.5]);
        assert_eq!(k.col_measures(), &[1.0]);
        assert_eq!(k.values().to_rows(), vec![vec![1.0], vec![0.0]]);
    }

    #[test]
    fn weighted_conversion() {
        let mut m = Matrix::zeros(2, 2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 2.0);
        let g = BipartiteGraph::new(2, 2, m).unwrap();
        let k = StepKernel::from_graph_weighted(&g).unwrap();
        assert_eq!(k.row_measures(), &[0.5, 0.5]);
        assert_eq!(k.col_measures(), &[0.75, 0.25]);
        assert_eq!(
            k.values().to_rows(),
            vec![vec![1.0, 1.0], vec![2.0, 0.0]]
        );

        let complete = BipartiteGraph::from_edges(2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let k = StepKernel::from_graph_weighted(&complete).unwrap();
        assert_eq!(k.row_measures(), &[0.5, 0.5]);
        assert_eq!(k.col_measures(), &[0.5, 0.5]);

        let isolated = BipartiteGraph::from_edges(2, 1, &[(0, 0)]).unwrap();
        let err = StepKernel::from_graph_weighted(&isolated).unwrap_err();
        assert!(err.to_string().contains("left vertex 1"));
    }

    #[test]
    fn transpose_cases() {
        let c = StepKernel::constant(0.7).unwrap();
        assert_eq!(c.transpose(), c);
        let sym = kernel(
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 0.0]],
        );
        assert_eq!(sym.transpose(), sym);
    }

    #[test]
    fn product_cases() {
        let a = StepKernel::constant(0.5).unwrap();
        let b = StepKernel::constant(0.4).unwrap();
        let p = a.product(&b);
        assert!((p.value(0, 0) - 0.2).abs() < 1e-15);

        let z = StepKernel::constant(0.0).unwrap();
        let p = eye2().product(&z);
        assert_eq!(p.values().max_abs(), 0.0);

        let u = eye2();
        let w = kernel(
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![vec![1.0, 1.0], vec![0.0, 0.0]],
        );
        let p = u.product(&w);
        assert_eq!(
            p.values().to_rows(),
            vec![vec![1.0, 0.0], vec![0.0, 0.0]]
        );
    }

    #[test]
    fn operator_product_cases() {
        let a = StepKernel::constant(0.5).unwrap();
        let b = StepKernel::constant(0.5).unwrap();
        assert!((a.operator_product(&b).value(0, 0) - 0.25).abs() < 1e-15);

        let p = eye2().operator_product(&eye2());
        assert_eq!(
            p.values().to_rows(),
            vec![vec![0.5, 0.0], vec![0.0, 0.5]]
        );

        let z = StepKernel::constant(0.0).unwrap();
        let p = eye2().operator_product(&z);
        assert_eq!(p.values().max_abs(), 0.0);
    }

    #[test]
    fn direct_sum_cases() {
        let part = eye2();
        let s = StepKernel::direct_sum(std::slice::from_ref(&part), &[1.0], &[1.0]).unwrap();
        assert_eq!(s, part);

        let c1 = StepKernel::constant(0.3).unwrap();
        let c2 = StepKernel::constant(0.9).unwrap();
        let s = StepKernel::direct_sum(&[c1, c2], &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(
            s.values().to_rows(),
            vec![vec![0.3, 0.0], vec![0.0, 0.9]]
        );
        let total: f64 = s.row_measures().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);

        let c = StepKernel::constant(1.0).unwrap();
        assert!(StepKernel::direct_sum(&[c], &[0.9], &[1.0]).is_err());
    }

    #[test]
    fn symmetrize_cases() {
        let one = StepKernel::constant(1.0).unwrap();
        let s = one.symmetrize();
        assert_eq!(s.row_measures(), &[0.5, 0.5]);
        assert_eq!(
            s.values().to_rows(),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]]
        );

        let zero = StepKernel::constant(0.0).unwrap();
        assert_eq!(zero.symmetrize().values().max_abs(), 0.0);
    }

    #[test]
    fn sixth_power_cases() {
        let one = StepKernel::constant(1.0).unwrap();
        assert!((one.sixth_power().value(0, 0) - 1.0).abs() < 1e-12);

        let c = StepKernel::constant(0.7).unwrap();
        assert!((c.sixth_power().value(0, 0) - 0.7f64.powi(6)).abs() < 1e-12);

        let p = eye2().sixth_power();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 / 32.0 } else { 0.0 };
                assert!((p.value(i, j) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn refinement_cases() {
        let w = kernel(
            vec![0.25, 0.75],
            vec![0.5, 0.5],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        );
        let (a, b) = w.common_refinement(&w);
        assert_eq!(a, b);
        assert_eq!(a.row_steps(), 2);

        let c = StepKernel::constant(0.5).unwrap();
        let (a, b) = c.common_refinement(&eye2());
        assert_eq!(a.row_steps(), 2);
        assert_eq!(b.row_steps(), 2);
        assert_eq!(a.value(0, 0), 0.5);
        assert_eq!(a.value(1, 1), 0.5);
        assert_eq!(b.value(0, 1), 0.0);
    }

    #[test]
    fn kernel_json_round_trip_and_validation() {
        let k = eye2();
        let back = StepKernel::from_json(&k.to_json()).unwrap();
        assert_eq!(k, back);

        // Measures not summing to one.
        let bad = r#"{"row_measures":[0.5,0.4],"col_measures":[1.0],"values":[[1.0],[0.0]]}"#;
        assert!(StepKernel::from_json(bad).is_err());
        // NaN is not valid JSON and must be rejected by the parser.
        let bad = r#"{"row_measures":[1.0],"col_measures":[1.0],"values":[[NaN]]}"#;
        assert!(StepKernel::from_json(bad).is_err());
        // Overflowing literals must not sneak in as infinities.
        let bad = r#"{"row_measures":[1.0],"col_measures":[1.0],"values":[[1e999]]}"#;
        assert!(StepKernel::from_json(bad).is_err());
        // Zero-measure steps are rejected rather than normalized away.
        let bad = r#"{"row_measures":[1.0,0.0],"col_measures":[1.0],"values":[[1.0],[0.0]]}"#;
        assert!(StepKernel::from_json(bad).is_err());
    }
}
