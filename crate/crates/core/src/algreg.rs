//! Block-density regularity decompositions driven by sixth-power path
//! profiles, and the accumulation-point scanner built on top of them.
//!
//! The profile of a vertex v on one side is the vector of normalised counts
//! of length-6 alternating walks from v to every other vertex of the same
//! side. Vertices with (near-)equal profiles are clustered into cells, the
//! exact edge densities between cells form the regularising stepfunction,
//! and sweeping a family over a parameter grid followed by single-linkage
//! merging under the cut distance exposes the finitely many limit
//! stepfunctions the family accumulates on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defgraphs::{classify_case, generate, predict_limit, FamilyId};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::kernel::{Side, StepKernel};
use crate::matrix::Matrix;
use crate::norms::{cut_distance, cut_norm_heuristic, DistanceMode};

/// Budget on |U| * |V| for profile computation.
pub const MAX_PROFILE_PRODUCT: usize = 4_000_000;
/// Restarts for the heuristic residual cut norm.
pub const RESIDUAL_RESTARTS: u32 = 20;
/// Restarts for heuristic cut distances inside sweeps and scans.
pub const DISTANCE_RESTARTS: u32 = 8;
/// Fixed seed for every heuristic inside the pipeline.
pub const PIPELINE_SEED: u64 = 17;

/// Normalisation record of a profile matrix: the walk counts are divided by
/// |U|^u_exponent * |V|^v_exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub u_exponent: u32,
    pub v_exponent: u32,
    pub divisor: f64,
    pub note: &'static str,
}

const NORMALIZATION_NOTE: &str =
    "walks from v to v' use three U-vertices and two interior V-vertices, so \
     dividing by |U|^3 |V|^2 (not |U|^3 |V|^3) makes the complete graph's \
     profile the constant 1";

/// Symmetric matrix of normalised sixth-power walk counts between vertices
/// of one side.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMatrix {
    pub side: Side,
    pub values: Matrix,
    pub normalization: Normalization,
}

fn mat_mul_u64(a: &[Vec<u64>], b: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![0u64; m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            let x = a[i][k];
            if x == 0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += x * b[k][j];
            }
        }
    }
    out
}

/// Normalised integral kernel of the sixth-power operator on the chosen
/// side: the cube of the Gram matrix of the adjacency matrix, divided by
/// |U|^3 |V|^2 (column side) or |V|^3 |U|^2 (row side). For 0/1 graphs the
/// cube is computed in integer arithmetic before the division.
pub fn profile_kernel(g: &BipartiteGraph, side: Side) -> Result<ProfileMatrix> {
    let m = g.left_count();
    let n = g.right_count();
    if m * n > MAX_PROFILE_PRODUCT {
        return Err(Error::budget(format!(
            "profile computation on {m} x {n} exceeds |U|*|V| <= {MAX_PROFILE_PRODUCT}"
        )));
    }
    if g.edge_weights().data().iter().any(|&w| w > 1.0) {
        return Err(Error::invalid(
            "profiles expect edge weights in [0, 1]",
        ));
    }
    let (u_exponent, v_exponent, out_dim) = match side {
        Side::Column => (3u32, 2u32, n),
        Side::Row => (2u32, 3u32, m),
    };
    let divisor = (m as f64).powi(u_exponent as i32) * (n as f64).powi(v_exponent as i32);

    let values = if g.is_simple() {
        // Gram matrix of the side in integer arithmetic.
        let gram: Vec<Vec<u64>> = match side {
            Side::Column => (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| {
                            (0..m)
                                .filter(|&u| g.weight(u, a) == 1.0 && g.weight(u, b) == 1.0)
                                .count() as u64
                        })
                        .collect()
                })
                .collect(),
            Side::Row => (0..m)
                .map(|a| {
                    (0..m)
                        .map(|b| {
                            (0..n)
                                .filter(|&v| g.weight(a, v) == 1.0 && g.weight(b, v) == 1.0)
                                .count() as u64
                        })
                        .collect()
                })
                .collect(),
        };
        let cubed = mat_mul_u64(&mat_mul_u64(&gram, &gram), &gram);
        Matrix::from_fn(out_dim, out_dim, |i, j| cubed[i][j] as f64 / divisor)
    } else {
        let a = g.edge_weights();
        let gram = match side {
            Side::Column => a.transpose().matmul(a),
            Side::Row => a.matmul(&a.transpose()),
        };
        let cubed = gram.matmul(&gram).matmul(&gram);
        cubed.map(|x| x / divisor)
    };

    Ok(ProfileMatrix {
        side,
        values,
        normalization: Normalization {
            u_exponent,
            v_exponent,
            divisor,
            note: NORMALIZATION_NOTE,
        },
    })
}

/// How to pick the clustering tolerance.
#[derive(Debug, Clone, Copy)]
pub enum ClusterStrategy {
    /// Derive the tolerance from the single-linkage merge profile: take the
    /// lowest merge-level jump whose relative size is at least one half and
    /// cut halfway across it. No qualifying jump means one cell.
    GapAuto,
    /// Group vertices whose profile rows differ by at most the given
    /// tolerance in the supremum norm (transitive closure).
    FixedTolerance(f64),
}

/// Diagnostics of a clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Whether a qualifying gap was found (gap_auto) or a tolerance given.
    pub found: bool,
    /// The tolerance actually used; `None` when no qualifying gap exists
    /// and every vertex merges into one cell.
    pub tau: Option<f64>,
    /// Merge levels bracketing the chosen gap.
    pub gap_low: f64,
    pub gap_high: f64,
    /// Relative size (gap_high - gap_low) / gap_high of the chosen gap.
    pub relative: f64,
    /// True when the transitive closure glued vertices whose direct
    /// distance exceeds tau.
    pub nonmetric_merge: bool,
}

/// A clustering of one side's vertices, cells ordered by size descending
/// with ties by least contained vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub cells: Vec<Vec<usize>>,
    pub report: GapReport,
}

fn row_sup_distance(values: &Matrix, a: usize, b: usize) -> f64 {
    let ra = values.row(a);
    let rb = values.row(b);
    ra.iter()
        .zip(rb)
        .fold(0.0_f64, |m, (&x, &y)| m.max((x - y).abs()))
}

/// Minimum-spanning-tree edge weights of the row sup-distance metric,
/// ascending (Prim's algorithm).
fn merge_levels(values: &Matrix) -> Vec<f64> {
    let n = values.rows();
    if n <= 1 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = row_sup_distance(values, 0, v);
    }
    let mut weights = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut w = f64::INFINITY;
        for v in 0..n {
            if !in_tree[v] && best[v] < w {
                next = v;
                w = best[v];
            }
        }
        weights.push(w);
        in_tree[next] = true;
        for v in 0..n {
            if !in_tree[v] {
                let d = row_sup_distance(values, next, v);
                if d < best[v] {
                    best[v] = d;
                }
            }
        }
    }
    weights.sort_by(f64::total_cmp);
    weights
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Groups the vertices of the profile's side by row similarity.
pub fn cluster_profiles(profile: &ProfileMatrix, strategy: ClusterStrategy) -> Clustering {
    let values = &profile.values;
    let n = values.rows();
    let (tau, found, gap_low, gap_high) = match strategy {
        ClusterStrategy::FixedTolerance(t) => (Some(t), true, t, t),
        ClusterStrategy::GapAuto => {
            let levels = merge_levels(values);
            let mut chosen = None;
            for t in 0..levels.len().saturating_sub(1) {
                let (lo, hi) = (levels[t], levels[t + 1]);
                if hi > 0.0 && (hi - lo) / hi >= 0.5 {
                    chosen = Some((lo, hi));
                    break;
                }
            }
            match chosen {
                Some((lo, hi)) => (Some((lo + hi) / 2.0), true, lo, hi),
                None => (None, false, 0.0, 0.0),
            }
        }
    };
    let effective_tau = tau.unwrap_or(f64::INFINITY);

    let mut uf = UnionFind::new(n);
    for a in 0..n {
        for b in (a + 1)..n {
            if row_sup_distance(values, a, b) <= effective_tau {
                uf.union(a, b);
            }
        }
    }
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for v in 0..n {
        let r = uf.find(v);
        match roots.iter().position(|&x| x == r) {
            Some(c) => cells[c].push(v),
            None => {
                roots.push(r);
                cells.push(vec![v]);
            }
        }
    }
    cells.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));

    // The closure is non-metric when some within-cell pair sits farther
    // apart than the tolerance.
    let mut nonmetric = false;
    'outer: for cell in &cells {
        for (i, &a) in cell.iter().enumerate() {
            for &b in &cell[i + 1..] {
                if row_sup_distance(values, a, b) > effective_tau {
                    nonmetric = true;
                    break 'outer;
                }
            }
        }
    }

    let relative = if gap_high > 0.0 {
        (gap_high - gap_low) / gap_high
    } else {
        0.0
    };
    Clustering {
        cells,
        report: GapReport {
            found,
            tau,
            gap_low,
            gap_high,
            relative,
            nonmetric_merge: nonmetric,
        },
    }
}

/// A two-sided cell decomposition of a graph with exact block densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityDecomposition {
    pub row_cells: Vec<Vec<usize>>,
    pub col_cells: Vec<Vec<usize>>,
    pub row_large: Vec<bool>,
    pub col_large: Vec<bool>,
    /// Exact edge densities f_ij between row cell i and column cell j.
    pub densities: Matrix,
    /// Heuristic cut norm of (uniform kernel - blockwise-constant kernel).
    pub residual_cut_norm: f64,
    /// Size of the smaller of the two merge-level gaps the clustering cut
    /// across; zero when no gap was found.
    pub profile_gap: f64,
    pub row_report: GapReport,
    pub col_report: GapReport,
}

impl RegularityDecomposition {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("decomposition serialization cannot fail")
    }

    /// The stepfunction on the large cells only, with measures renormalised
    /// to the large part. The biggest cell always qualifies, so this is
    /// total.
    pub fn large_cell_kernel(&self) -> StepKernel {
        let rows: Vec<&Vec<usize>> = self
            .row_cells
            .iter()
            .zip(&self.row_large)
            .filter(|(_, &l)| l)
            .map(|(c, _)| c)
            .collect();
        let cols: Vec<&Vec<usize>> = self
            .col_cells
            .iter()
            .zip(&self.col_large)
            .filter(|(_, &l)| l)
            .map(|(c, _)| c)
            .collect();
        let row_total: usize = rows.iter().map(|c| c.len()).sum();
        let col_total: usize = cols.iter().map(|c| c.len()).sum();
        let row_idx: Vec<usize> = self
            .row_large
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .map(|(i, _)| i)
            .collect();
        let col_idx: Vec<usize> = self
            .col_large
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .map(|(j, _)| j)
            .collect();
        let values = Matrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.densities.get(row_idx[i], col_idx[j])
        });
        StepKernel::new(
            rows.iter().map(|c| c.len() as f64 / row_total as f64).collect(),
            cols.iter().map(|c| c.len() as f64 / col_total as f64).collect(),
            values,
        )
        .expect("large cells form a valid kernel")
    }
}

/// Clusters both sides by their sixth-power profiles, computes exact block
/// densities, flags small cells, and estimates the residual cut norm of
/// the blockwise approximation. `cell_threshold` is the relative size below
/// which a cell counts as small; the default is 0.5 / (number of cells on
/// that side).
pub fn algebraic_regularize(
    g: &BipartiteGraph,
    cell_threshold: Option<f64>,
) -> Result<RegularityDecomposition> {
    let col_profile = profile_kernel(g, Side::Column)?;
    let row_profile = profile_kernel(g, Side::Row)?;
    let col_clustering = cluster_profiles(&col_profile, ClusterStrategy::GapAuto);
    let row_clustering = cluster_profiles(&row_profile, ClusterStrategy::GapAuto);

    let m = g.left_count();
    let n = g.right_count();
    let large_flags = |cells: &[Vec<usize>], total: usize| -> Vec<bool> {
        let threshold = cell_threshold.unwrap_or(0.5 / cells.len() as f64);
        cells
            .iter()
            .map(|c| c.len() as f64 / total as f64 >= threshold)
            .collect()
    };
    let row_large = large_flags(&row_clustering.cells, m);
    let col_large = large_flags(&col_clustering.cells, n);

    let densities = Matrix::from_fn(row_clustering.cells.len(), col_clustering.cells.len(), |i, j| {
        let ri = &row_clustering.cells[i];
        let cj = &col_clustering.cells[j];
        let total: f64 = ri
            .iter()
            .map(|&u| cj.iter().map(|&v| g.weight(u, v)).sum::<f64>())
            .sum();
        total / (ri.len() * cj.len()) as f64
    });

    // Residual: cut norm of the deviation from the blockwise approximation.
    let mut row_cell_of = vec![0usize; m];
    for (c, cell) in row_clustering.cells.iter().enumerate() {
        for &v in cell {
            row_cell_of[v] = c;
        }
    }
    let mut col_cell_of = vec![0usize; n];
    for (c, cell) in col_clustering.cells.iter().enumerate() {
        for &v in cell {
            col_cell_of[v] = c;
        }
    }
    let deviation = StepKernel::new(
        vec![1.0 / m as f64; m],
        vec![1.0 / n as f64; n],
        Matrix::from_fn(m, n, |u, v| {
            g.weight(u, v) - densities.get(row_cell_of[u], col_cell_of[v])
        }),
    )?;
    let residual_cut_norm = cut_norm_heuristic(&deviation, RESIDUAL_RESTARTS, PIPELINE_SEED).value;

    let gap_of = |r: &GapReport| if r.found { r.gap_high - r.gap_low } else { 0.0 };
    let profile_gap = gap_of(&row_clustering.report).min(gap_of(&col_clustering.report));

    Ok(RegularityDecomposition {
        row_cells: row_clustering.cells,
        col_cells: col_clustering.cells,
        row_large,
        col_large,
        densities,
        residual_cut_norm,
        profile_gap,
        row_report: row_clustering.report,
        col_report: col_clustering.report,
    })
}

/// Upper bound on the cut distance between two small stepfunctions,
/// computed by the heuristic rearrangement search with pipeline defaults.
pub fn kernel_distance(a: &StepKernel, b: &StepKernel) -> f64 {
    cut_distance(
        a,
        b,
        DistanceMode::Heuristic {
            restarts: DISTANCE_RESTARTS,
            seed: PIPELINE_SEED,
        },
    )
    .expect("heuristic distance cannot fail")
}

/// One merged accumulation cluster of a family sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulationCluster {
    /// The large-cell stepfunction of the largest member q.
    pub representative: StepKernel,
    /// Parameters q whose instances merged into this cluster, ascending.
    pub members: Vec<u64>,
}

/// Regularises each instance, restricts to large cells, and single-linkage
/// merges the resulting stepfunctions under cut distance <= merge_tol.
/// Clusters are ordered by smallest member q.
pub fn accumulation_scan(
    fam: FamilyId,
    q_list: &[u64],
    merge_tol: f64,
) -> Result<Vec<AccumulationCluster>> {
    let kernels = large_cell_kernels(fam, q_list)?;
    Ok(merge_kernels(q_list, &kernels, merge_tol))
}

fn large_cell_kernels(fam: FamilyId, q_list: &[u64]) -> Result<Vec<StepKernel>> {
    q_list
        .par_iter()
        .map(|&q| {
            let g = generate(fam, q)?;
            Ok(algebraic_regularize(&g, None)?.large_cell_kernel())
        })
        .collect()
}

fn merge_kernels(q_list: &[u64], kernels: &[StepKernel], merge_tol: f64) -> Vec<AccumulationCluster> {
    let n = kernels.len();
    let mut uf = UnionFind::new(n);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let near: Vec<(usize, usize)> = pairs
        .par_iter()
        .filter(|&&(i, j)| kernel_distance(&kernels[i], &kernels[j]) <= merge_tol)
        .copied()
        .collect();
    for (i, j) in near {
        uf.union(i, j);
    }
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        match clusters.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(i),
            None => clusters.push((r, vec![i])),
        }
    }
    clusters
        .into_iter()
        .map(|(_, members)| {
            let best = *members
                .iter()
                .max_by_key(|&&i| q_list[i])
                .expect("clusters are nonempty");
            AccumulationCluster {
                representative: kernels[best].clone(),
                members: members.iter().map(|&i| q_list[i]).collect(),
            }
        })
        .collect()
}

/// Per-instance summary emitted by a family sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub q: u64,
    pub case_label: String,
    pub n_row_cells: usize,
    pub n_col_cells: usize,
    pub n_row_large: usize,
    pub n_col_large: usize,
    pub residual_cut_norm: f64,
    /// Cut distance from the large-cell stepfunction to the predicted limit.
    pub d_cut_to_prediction: f64,
}

/// Full outcome of a family sweep: one row per q plus the merged clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub clusters: Vec<AccumulationCluster>,
}

/// Regularises every instance of the family on the grid, compares each
/// large-cell stepfunction with the predicted limit, and merges the
/// stepfunctions into accumulation clusters.
pub fn sweep_family(fam: FamilyId, q_list: &[u64], merge_tol: f64) -> Result<SweepOutcome> {
    if q_list.is_empty() {
        return Err(Error::invalid("empty parameter grid"));
    }
    let per_q: Vec<(SweepRow, StepKernel)> = q_list
        .par_iter()
        .map(|&q| {
            let g = generate(fam, q)?;
            let dec = algebraic_regularize(&g, None)?;
            let kernel = dec.large_cell_kernel();
            let prediction = predict_limit(fam, q)?;
            let row = SweepRow {
                family: fam.tag().to_string(),
                q,
                case_label: classify_case(fam, q)?,
                n_row_cells: dec.row_cells.len(),
                n_col_cells: dec.col_cells.len(),
                n_row_large: dec.row_large.iter().filter(|&&l| l).count(),
                n_col_large: dec.col_large.iter().filter(|&&l| l).count(),
                residual_cut_norm: dec.residual_cut_norm,
                d_cut_to_prediction: kernel_distance(&kernel, &prediction.representative),
            };
            Ok((row, kernel))
        })
        .collect::<Result<_>>()?;
    let (rows, kernels): (Vec<SweepRow>, Vec<StepKernel>) = per_q.into_iter().unzip();
    let clusters = merge_kernels(q_list, &kernels, merge_tol);
    Ok(SweepOutcome { rows, clusters })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> BipartiteGraph {
        BipartiteGraph::from_predicate(n, n, |_, _| true).unwrap()
    }

    #[test]
    fn profile_of_complete_graph_is_one() {
        let p = profile_kernel(&complete(5), Side::Column).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((p.values.get(i, j) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_of_empty_graph_is_zero() {
        let g = BipartiteGraph::from_edges(4, 4, &[]).unwrap();
        let p = profile_kernel(&g, Side::Column).unwrap();
        assert_eq!(p.values.max_abs(), 0.0);
    }

    /// Raw five-fold loop over (u1, v2, u2, v3, u3).
    fn walk_count_oracle(g: &BipartiteGraph, v: usize, vp: usize) -> u64 {
        let m = g.left_count();
        let n = g.right_count();
        let e = |u: usize, w: usize| g.weight(u, w) == 1.0;
        let mut count = 0u64;
        for u1 in 0..m {
            if !e(u1, v) {
                continue;
            }
            for v2 in 0..n {
                if !e(u1, v2) {
                    continue;
                }
                for u2 in 0..m {
                    if !e(u2, v2) {
                        continue;
                    }
                    for v3 in 0..n {
                        if !e(u2, v3) {
                            continue;
                        }
                        for u3 in 0..m {
                            if e(u3, v3) && e(u3, vp) {
                                count += 1;
                            }
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn profile_matches_walk_count_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let m = rng.gen_range(2..=6);
            let n = rng.gen_range(2..=6);
            let g = BipartiteGraph::from_predicate(m, n, |_, _| rng.gen_bool(0.5)).unwrap();
            let p = profile_kernel(&g, Side::Column).unwrap();
            let divisor = (m as f64).powi(3) * (n as f64).powi(2);
            for v in 0..n {
                for vp in 0..n {
                    let oracle = walk_count_oracle(&g, v, vp) as f64 / divisor;
                    assert!((p.values.get(v, vp) - oracle).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn profile_respects_transpose_duality() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = BipartiteGraph::from_predicate(5, 7, |_, _| rng.gen_bool(0.4)).unwrap();
        let transposed = BipartiteGraph::new(7, 5, g.edge_weights().transpose()).unwrap();
        let col = profile_kernel(&g, Side::Column).unwrap();
        let row_of_transpose = profile_kernel(&transposed, Side::Row).unwrap();
        assert!(col.values.max_abs_diff(&row_of_transpose.values) < 1e-15);
        // Entries stay inside [0, 1] and the matrix is symmetric.
        for i in 0..col.values.rows() {
            for j in 0..col.values.cols() {
                let x = col.values.get(i, j);
                assert!((0.0..=1.0).contains(&x));
                assert!((x - col.values.get(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_matches_kernel_algebra_route() {
        // The normalised walk profile is the sixth-power kernel of the
        // transposed uniform kernel, computed through a disjoint code path.
        use crate::kernel::StepKernel;
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let m = rng.gen_range(2..=8);
            let n = rng.gen_range(2..=8);
            let g = BipartiteGraph::from_predicate(m, n, |_, _| rng.gen_bool(0.5)).unwrap();
            let profile = profile_kernel(&g, Side::Column).unwrap();
            let algebra = StepKernel::from_graph_uniform(&g)
                .unwrap()
                .transpose()
                .sixth_power();
            assert!(profile.values.max_abs_diff(algebra.values()) < 1e-10);
        }
    }

    #[test]
    fn profile_budget_is_enforced() {
        let g = BipartiteGraph::from_edges(2001, 2001, &[]).unwrap();
        assert!(matches!(
            profile_kernel(&g, Side::Column),
            Err(Error::Budget(_))
        ));
    }

    fn profile_from_rows(rows: Vec<Vec<f64>>) -> ProfileMatrix {
        ProfileMatrix {
            side: Side::Column,
            values: Matrix::from_rows(rows).unwrap(),
            normalization: Normalization {
                u_exponent: 3,
                v_exponent: 2,
                divisor: 1.0,
                note: "",
            },
        }
    }

    #[test]
    fn cluster_two_distinct_rows_at_zero_tolerance() {
        let p = profile_from_rows(vec![
            vec![0.2, 0.7, 0.2],
            vec![0.7, 0.2, 0.7],
            vec![0.2, 0.7, 0.2],
            vec![0.7, 0.2, 0.7],
        ]);
        let c = cluster_profiles(&p, ClusterStrategy::FixedTolerance(0.0));
        assert_eq!(c.cells, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn cluster_survives_small_noise_under_gap_auto() {
        // Two row groups separated by 0.5; noise an order of magnitude below.
        let noise = [0.01, -0.02, 0.015, -0.005, 0.02, -0.01];
        let base = [0.2, 0.7];
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let level = base[i % 2];
                (0..6).map(|j| level + noise[(i + j) % 6]).collect()
            })
            .collect();
        let p = profile_from_rows(rows);
        let c = cluster_profiles(&p, ClusterStrategy::GapAuto);
        assert_eq!(c.cells.len(), 2);
        assert!(c.report.found);
        assert_eq!(c.cells[0], vec![0, 2, 4]);
        assert_eq!(c.cells[1], vec![1, 3, 5]);
    }

    #[test]
    fn cluster_constant_matrix_is_one_cell() {
        let p = profile_from_rows(vec![vec![0.3; 4]; 4]);
        let c = cluster_profiles(&p, ClusterStrategy::GapAuto);
        assert_eq!(c.cells.len(), 1);
        assert!(!c.report.found);
    }

    #[test]
    fn regularize_complete_graph() {
        let dec = algebraic_regularize(&complete(6), None).unwrap();
        assert_eq!(dec.row_cells.len(), 1);
        assert_eq!(dec.col_cells.len(), 1);
        assert!((dec.densities.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(dec.residual_cut_norm < 1e-12);
        // Full decompositions round-trip through JSON.
        let back: RegularityDecomposition = serde_json::from_str(&dec.to_json()).unwrap();
        assert_eq!(back, dec);
    }

    #[test]
    fn regularize_cube_products_at_thirteen() {
        let g = generate(FamilyId::ProdCubes, 13).unwrap();
        let dec = algebraic_regularize(&g, None).unwrap();
        // Three cube classes of size four plus the zero element.
        assert_eq!(dec.col_cells.len(), 4);
        let sizes: Vec<usize> = dec.col_cells.iter().map(|c| c.len()).collect();
        assert_eq!(sizes, vec![4, 4, 4, 1]);
        assert_eq!(dec.col_large, vec![true, true, true, false]);
        // Densities between large cells are exactly 0 or 1.
        for i in 0..3 {
            for j in 0..3 {
                let d = dec.densities.get(i, j);
                assert!(d == 0.0 || d == 1.0, "density {d}");
            }
        }
        let kernel = dec.large_cell_kernel();
        let predicted = predict_limit(FamilyId::ProdCubes, 13).unwrap();
        assert!(kernel_distance(&kernel, &predicted.representative) < 1e-9);
    }

    #[test]
    fn regularize_paley_at_thirteen() {
        let g = generate(FamilyId::PaleySumSquares, 13).unwrap();
        let dec = algebraic_regularize(&g, None).unwrap();
        assert_eq!(dec.row_cells.len(), 1);
        assert_eq!(dec.col_cells.len(), 1);
        assert!((dec.densities.get(0, 0) - 7.0 / 13.0).abs() < 1e-12);
        assert!(dec.residual_cut_norm <= 2.0 / 13.0f64.sqrt());
    }

    #[test]
    fn scan_paley_odd_converges_to_half() {
        let grid = [5u64, 7, 9, 11, 13, 17, 25, 49, 81, 121];
        let clusters = accumulation_scan(FamilyId::PaleySumSquares, &grid, 0.1).unwrap();
        assert_eq!(clusters.len(), 1);
        let half = StepKernel::constant(0.5).unwrap();
        assert!(kernel_distance(&clusters[0].representative, &half) < 0.05);
        assert_eq!(clusters[0].members, grid);
    }

    #[test]
    fn scan_paley_even_is_exactly_complete() {
        let grid = [2u64, 4, 8, 16];
        let clusters = accumulation_scan(FamilyId::PaleySumSquares, &grid, 0.1).unwrap();
        assert_eq!(clusters.len(), 1);
        let one = StepKernel::constant(1.0).unwrap();
        assert_eq!(
            kernel_distance(&clusters[0].representative, &one),
            0.0
        );
    }

    #[test]
    fn scan_sum_cubes_splits_by_residue() {
        let clusters =
            accumulation_scan(FamilyId::SumCubes, &[7, 13, 19, 31], 0.2).unwrap();
        assert_eq!(clusters.len(), 1);
        let third = StepKernel::constant(1.0 / 3.0).unwrap();
        assert!(kernel_distance(&clusters[0].representative, &third) < 0.1);

        let clusters = accumulation_scan(FamilyId::SumCubes, &[5, 11, 17], 0.2).unwrap();
        assert_eq!(clusters.len(), 1);
        let one = StepKernel::constant(1.0).unwrap();
        assert_eq!(kernel_distance(&clusters[0].representative, &one), 0.0);
    }
}
