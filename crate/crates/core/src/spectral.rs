//! Measure-weighted singular value decomposition of kernel operators and
//! the constructive weak regularisation of the sixth-power kernel.
//!
//! The operator of a kernel W acts between the measure-weighted L^2 spaces
//! of the two step partitions. Conjugating by the square roots of the step
//! measures turns it into an ordinary matrix, whose SVD we compute with a
//! deterministic one-sided Jacobi iteration (cyclic pivot order, sign fixed
//! so the first nonzero entry of each right vector is positive).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Side, StepKernel};
use crate::matrix::Matrix;

/// Singular values below this threshold are treated as numerical rank
/// deficiency and dropped.
pub const SIGMA_CUTOFF: f64 = 1e-12;
/// Runs whose partition could exceed this many cells are rejected.
pub const MAX_CELLS: usize = 1_000_000_000;

/// Measure-weighted singular system of a kernel operator: descending
/// singular values with left step functions on the row partition and right
/// step functions on the column partition, orthonormal in the respective
/// weighted inner products, with
/// `W(x,y) = sum_i sigma_i u_i(x) y_i(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub singular_values: Vec<f64>,
    pub left_vectors: Vec<Vec<f64>>,
    pub right_vectors: Vec<Vec<f64>>,
    pub row_measures: Vec<f64>,
    pub col_measures: Vec<f64>,
}

impl SpectralDecomposition {
    /// Weighted inner product on the column side.
    pub fn col_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.col_measures)
            .map(|((&a, &b), &m)| a * b * m)
            .sum()
    }

    /// Weighted inner product on the row side.
    pub fn row_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.row_measures)
            .map(|((&a, &b), &m)| a * b * m)
            .sum()
    }

    /// Rebuilds the kernel as sum_i sigma_i u_i(x) y_i(y).
    pub fn reconstruct(&self) -> StepKernel {
        let m = self.row_measures.len();
        let n = self.col_measures.len();
        let values = Matrix::from_fn(m, n, |i, j| {
            self.singular_values
                .iter()
                .enumerate()
                .map(|(k, &s)| s * self.left_vectors[k][i] * self.right_vectors[k][j])
                .sum()
        });
        StepKernel::new(self.row_measures.clone(), self.col_measures.clone(), values)
            .expect("reconstruction preserves validity")
    }
}

/// Plain one-sided Jacobi SVD of `mat` (any shape), returning triples
/// sorted by descending singular value. Deterministic for a fixed input.
fn jacobi_svd(mat: &Matrix) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    let transposed = mat.rows() < mat.cols();
    let a0 = if transposed { mat.transpose() } else { mat.clone() };
    let m = a0.rows();
    let n = a0.cols();
    // Columns of `a` are rotated in place; `v` accumulates the rotations.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a0.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = a0.max_abs();
    if scale > 0.0 {
        let tol = 1e-28;
        for _sweep in 0..80 {
            let mut converged = true;
            for p in 0..n {
                for q in (p + 1)..n {
                    let app: f64 = a[p].iter().map(|x| x * x).sum();
                    let aqq: f64 = a[q].iter().map(|x| x * x).sum();
                    let apq: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                    if apq * apq <= tol * app * aqq {
                        continue;
                    }
                    converged = false;
                    let zeta = (aqq - app) / (2.0 * apq);
                    let t = if zeta >= 0.0 {
                        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                    } else {
                        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let (x, y) = (a[p][i], a[q][i]);
                        a[p][i] = c * x - s * y;
                        a[q][i] = s * x + c * y;
                    }
                    for i in 0..n {
                        let (x, y) = (v[p][i], v[q][i]);
                        v[p][i] = c * x - s * y;
                        v[q][i] = s * x + c * y;
                    }
                }
            }
            if converged {
                break;
            }
        }
    }
    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for j in 0..n {
        let sigma = a[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if sigma <= SIGMA_CUTOFF {
            continue;
        }
        let left: Vec<f64> = a[j].iter().map(|x| x / sigma).collect();
        let right = v[j].clone();
        triples.push(if transposed {
            (sigma, right, left)
        } else {
            (sigma, left, right)
        });
    }
    triples.sort_by(|x, y| y.0.total_cmp(&x.0));
    triples
}

/// Singular value decomposition of the kernel operator of `w` on the
/// measure-weighted L^2 spaces.
pub fn svd(w: &StepKernel) -> SpectralDecomposition {
    let a = w.row_measures();
    let b = w.col_measures();
    let m = w.row_steps();
    let n = w.col_steps();
    let weighted = Matrix::from_fn(m, n, |i, j| w.value(i, j) * (a[i] * b[j]).sqrt());
    let triples = jacobi_svd(&weighted);
    let mut singular_values = Vec::with_capacity(triples.len());
    let mut left_vectors = Vec::with_capacity(triples.len());
    let mut right_vectors = Vec::with_capacity(triples.len());
    for (sigma, p, q) in triples {
        // Unweight: u_i = p / sqrt(a), y_i = q / sqrt(b).
        let mut u: Vec<f64> = p.iter().zip(a).map(|(&x, &ai)| x / ai.sqrt()).collect();
        let mut y: Vec<f64> = q.iter().zip(b).map(|(&x, &bj)| x / bj.sqrt()).collect();
        // Sign convention: first nonzero entry of the right vector positive.
        if let Some(first) = y.iter().find(|x| x.abs() > SIGMA_CUTOFF) {
            if *first < 0.0 {
                for x in &mut u {
                    *x = -*x;
                }
                for x in &mut y {
                    *x = -*x;
                }
            }
        }
        singular_values.push(sigma);
        left_vectors.push(u);
        right_vectors.push(y);
    }
    SpectralDecomposition {
        singular_values,
        left_vectors,
        right_vectors,
        row_measures: a.to_vec(),
        col_measures: b.to_vec(),
    }
}

/// Result of weak regularisation: a stepfunction `approx_kernel` constant on
/// each product of cells that approximates the sixth-power kernel of the
/// chosen side within `2 eps^2` in the supremum norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakRegularityResult {
    pub eps: f64,
    /// Discretisation grid spacing, eps^2 / 5.
    pub delta: f64,
    pub cell_count: usize,
    /// Partition of the powered side's steps into cells (column steps for
    /// [`Side::Column`], row steps for [`Side::Row`]).
    #[serde(rename = "column_cells")]
    pub cells: Vec<Vec<usize>>,
    pub approx_kernel: StepKernel,
    /// Exact supremum distance between the sixth-power kernel (computed by
    /// the operator-product path) and `approx_kernel`.
    pub achieved_inf_error: f64,
    pub side: Side,
}

impl WeakRegularityResult {
    /// The theoretical cell bound (5/eps^3)^(1/eps^2), +inf when it
    /// overflows the float range.
    pub fn cell_bound(eps: f64) -> f64 {
        ((1.0 / (eps * eps)) * (5.0 / (eps * eps * eps)).ln()).exp()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("result serialization cannot fail")
    }
}

/// Weak regularisation of the column-side sixth power (the default side).
pub fn weak_regularize(w: &StepKernel, eps: f64) -> Result<WeakRegularityResult> {
    weak_regularize_on(w, eps, Side::Column)
}

/// Weak regularisation of the sixth-power kernel on the chosen side.
///
/// Singular directions with sigma >= eps are kept and their step functions
/// discretised to the grid `delta * round(x / delta)` (ties toward zero)
/// with `delta = eps^2 / 5`; steps sharing all discretised values form one
/// cell, and the approximation is the kernel of the truncated-discretised
/// operator. The sixth-power kernel used for the error report is computed
/// independently through the operator-product algebra.
pub fn weak_regularize_on(w: &StepKernel, eps: f64, side: Side) -> Result<WeakRegularityResult> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps = {eps} must lie in (0, 1]")));
    }
    if !w.is_graphon() {
        return Err(Error::invalid(
            "weak regularisation expects a graphon (values in [0,1])",
        ));
    }
    let steps = match side {
        Side::Column => w.col_steps(),
        Side::Row => w.row_steps(),
    };
    if steps > MAX_CELLS {
        return Err(Error::budget(format!(
            "partition could require {steps} cells, over the {MAX_CELLS} cap"
        )));
    }
    let delta = eps * eps / 5.0;
    let dec = svd(w);
    let vectors: Vec<&Vec<f64>> = dec
        .singular_values
        .iter()
        .zip(match side {
            Side::Column => dec.right_vectors.iter(),
            Side::Row => dec.left_vectors.iter(),
        })
        .filter(|(&s, _)| s >= eps)
        .map(|(_, v)| v)
        .collect();
    let retained: Vec<f64> = dec
        .singular_values
        .iter()
        .copied()
        .filter(|&s| s >= eps)
        .collect();

    // Discretised level vectors, one per step of the powered side.
    let levels: Vec<Vec<i64>> = (0..steps)
        .map(|k| {
            vectors
                .iter()
                .map(|v| round_ties_to_zero(v[k] / delta))
                .collect()
        })
        .collect();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut keys: Vec<Vec<i64>> = Vec::new();
    for (k, level) in levels.iter().enumerate() {
        match keys.iter().position(|key| key == level) {
            Some(c) => cells[c].push(k),
            None => {
                keys.push(level.clone());
                cells.push(vec![k]);
            }
        }
    }

    // Kernel of the truncated-discretised operator: constant on cell pairs.
    let measures = match side {
        Side::Column => dec.col_measures.clone(),
        Side::Row => dec.row_measures.clone(),
    };
    let values = Matrix::from_fn(steps, steps, |k, l| {
        retained
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                s.powi(6) * (levels[k][i] as f64 * delta) * (levels[l][i] as f64 * delta)
            })
            .sum()
    });
    let approx_kernel = StepKernel::new(measures.clone(), measures, values)?;

    let sixth = match side {
        Side::Column => w.transpose().sixth_power(),
        Side::Row => w.sixth_power(),
    };
    let achieved_inf_error = sixth.values().max_abs_diff(approx_kernel.values());

    Ok(WeakRegularityResult {
        eps,
        delta,
        cell_count: cells.len(),
        cells,
        approx_kernel,
        achieved_inf_error,
        side,
    })
}

/// Nearest-integer rounding with exact halves rounded toward zero.
fn round_ties_to_zero(x: f64) -> i64 {
    let t = x.trunc();
    let frac = x - t;
    if frac.abs() == 0.5 {
        t as i64
    } else {
        x.round() as i64
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
    fn svd_constant() {
        let dec = svd(&StepKernel::constant(0.7).unwrap());
        assert_eq!(dec.singular_values.len(), 1);
        assert!((dec.singular_values[0] - 0.7).abs() < 1e-12);
        assert!((dec.left_vectors[0][0] - 1.0).abs() < 1e-12);
        assert!((dec.right_vectors[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_identity_two_steps() {
        let dec = svd(&eye2());
        assert_eq!(dec.singular_values.len(), 2);
        for s in &dec.singular_values {
            assert!((s - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_zero_kernel() {
        let dec = svd(&StepKernel::constant(0.0).unwrap());
        assert!(dec.singular_values.is_empty());
    }

    #[test]
    fn svd_rectangular_reconstruction() {
        let w = kernel(
            vec![0.2, 0.5, 0.3],
            vec![0.6, 0.4],
            vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.5, 0.5]],
        );
        let dec = svd(&w);
        let back = dec.reconstruct();
        assert!(w.values().max_abs_diff(back.values()) < 1e-10);
        // Weighted orthonormality of both systems.
        for i in 0..dec.singular_values.len() {
            for j in 0..dec.singular_values.len() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (dec.row_inner(&dec.left_vectors[i], &dec.left_vectors[j]) - expect).abs()
                        < 1e-10
                );
                assert!(
                    (dec.col_inner(&dec.right_vectors[i], &dec.right_vectors[j]) - expect).abs()
                        < 1e-10
                );
            }
        }
    }

    #[test]
    fn weak_regularize_rank_one() {
        let one = StepKernel::constant(1.0).unwrap();
        let r = weak_regularize(&one, 0.5).unwrap();
        assert_eq!(r.cell_count, 1);
        assert!(r.achieved_inf_error < 1e-12);
        assert!((r.approx_kernel.value(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weak_regularize_zero() {
        let zero = StepKernel::constant(0.0).unwrap();
        let r = weak_regularize(&zero, 0.3).unwrap();
        assert_eq!(r.cell_count, 1);
        assert_eq!(r.achieved_inf_error, 0.0);
    }

    #[test]
    fn weak_regularize_truncates_small_spectrum() {
        let r = weak_regularize(&eye2(), 0.6).unwrap();
        // Both singular values are 1/2 < 0.6, so the approximation is zero
        // and the error is the largest sixth-power entry.
        assert_eq!(r.approx_kernel.values().max_abs(), 0.0);
        assert!((r.achieved_inf_error - 1.0 / 32.0).abs() < 1e-12);
        assert!(r.achieved_inf_error <= 2.0 * 0.6 * 0.6);
    }

    #[test]
    fn sixth_power_kernel_matches_spectral_form() {
        // The column-side sixth-power kernel equals
        // sum_i sigma_i^6 y_i(x) y_i(y); the left side comes from the
        // operator-product algebra, the right from the decomposition.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let rows = rng.gen_range(1..=7);
            let cols = rng.gen_range(1..=7);
            let rm: Vec<f64> = {
                let raw: Vec<f64> = (0..rows).map(|_| rng.gen_range(0.2..1.0)).collect();
                let t: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / t).collect()
            };
            let cm: Vec<f64> = {
                let raw: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.2..1.0)).collect();
                let t: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / t).collect()
            };
            let w = kernel(
                rm,
                cm,
                (0..rows)
                    .map(|_| (0..cols).map(|_| rng.gen_range(0.0..1.0)).collect())
                    .collect(),
            );
            let algebra = w.transpose().sixth_power();
            let dec = svd(&w);
            let spectral = Matrix::from_fn(cols, cols, |k, l| {
                dec.singular_values
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| {
                        s.powi(6) * dec.right_vectors[i][k] * dec.right_vectors[i][l]
                    })
                    .sum()
            });
            assert!(algebra.values().max_abs_diff(&spectral) < 1e-10);
        }
    }

    #[test]
    fn weak_regularize_rectangular_kernel() {
        let w = kernel(
            vec![0.3, 0.7],
            vec![0.2, 0.3, 0.5],
            vec![vec![0.9, 0.1, 0.4], vec![0.2, 0.8, 0.6]],
        );
        for side in [Side::Column, Side::Row] {
            let eps = 0.45;
            let r = weak_regularize_on(&w, eps, side).unwrap();
            let steps = match side {
                Side::Column => w.col_steps(),
                Side::Row => w.row_steps(),
            };
            assert_eq!(r.approx_kernel.row_steps(), steps);
            assert!(r.achieved_inf_error <= 2.0 * eps * eps);
            let covered: usize = r.cells.iter().map(|c| c.len()).sum();
            assert_eq!(covered, steps);
        }
    }

    #[test]
    fn weak_regularize_validates() {
        let one = StepKernel::constant(1.0).unwrap();
        assert!(weak_regularize(&one, 0.0).is_err());
        assert!(weak_regularize(&one, 1.5).is_err());
        let not_graphon = StepKernel::constant(-0.5).unwrap();
        assert!(weak_regularize(&not_graphon, 0.5).is_err());
    }

    #[test]
    fn ties_round_toward_zero() {
        assert_eq!(round_ties_to_zero(2.5), 2);
        assert_eq!(round_ties_to_zero(-2.5), -2);
        assert_eq!(round_ties_to_zero(2.4), 2);
        assert_eq!(round_ties_to_zero(2.6), 3);
        assert_eq!(round_ties_to_zero(-0.5), 0);
    }
}
