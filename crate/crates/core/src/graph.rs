//! Undirected weighted communication graph for the observer network.
//!
//! Holds the observer-to-observer links, builds the Laplacian, tests
//! connectivity by traversal, and runs the collective strong-detectability
//! test two independent ways (stacked-basis rank and the positive
//! definiteness of the Laplacian-weighted complement Gramian).

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, RankTolerance};

/// Undirected weighted graph over observer nodes `0..node_count`.
///
/// Edges are stored once per unordered pair; weights are strictly positive
/// and self-loops are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    node_count: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl CommGraph {
    pub fn new(node_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut stored = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) references a node outside 0..{node_count}"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) must have a positive finite weight, got {w}"
                )));
            }
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if stored.iter().any(|&(a, b, _)| (a, b) == (lo, hi)) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate edge ({lo}, {hi})"
                )));
            }
            stored.push((lo, hi, w));
        }
        Ok(Self {
            node_count,
            edges: stored,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Symmetric adjacency matrix.
    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.node_count, self.node_count);
        for &(i, j, w) in &self.edges {
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        a
    }

    /// Neighbor weights of node `i` as (neighbor, weight) pairs.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for &(a, b, w) in &self.edges {
            if a == i {
                out.push((b, w));
            } else if b == i {
                out.push((a, w));
            }
        }
        out
    }
}

/// Graph Laplacian: diagonal holds weighted degrees, off-diagonal the
/// negated adjacency. Symmetric, positive semidefinite, zero row sums.
pub fn laplacian(g: &CommGraph) -> Matrix {
    let n = g.node_count();
    let a = g.adjacency();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            degree += a[(i, j)];
            if i != j {
                l[(i, j)] = -a[(i, j)];
            }
        }
        l[(i, i)] = degree;
    }
    l
}

/// Connectivity by breadth-first traversal over positive-weight edges.
pub fn is_connected(g: &CommGraph) -> bool {
    let n = g.node_count();
    if n <= 1 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = vec![0usize];
    seen[0] = true;
    while let Some(i) = queue.pop() {
        for (j, _) in g.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Second-smallest Laplacian eigenvalue, reported as a diagnostic next to
/// the traversal-based connectivity result.
pub fn algebraic_connectivity(g: &CommGraph) -> f64 {
    let n = g.node_count();
    if n <= 1 {
        return f64::INFINITY;
    }
    let l = laplacian(g);
    let mut eigs: Vec<f64> = l.symmetric_eigen().eigenvalues.iter().cloned().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).expect("laplacian eigenvalues are finite"));
    eigs[1]
}

/// Outcome of the collective strong-detectability test with both routes'
/// diagnostics.
#[derive(Debug, Clone)]
pub struct CollectiveDetectability {
    /// Sum of the per-node reconstructible subspaces spans the state space.
    pub holds: bool,
    /// Rank of the horizontally stacked per-node bases.
    pub stacked_rank: usize,
    /// Smallest eigenvalue of the Laplacian-weighted complement Gramian.
    pub gramian_min_eig: f64,
}

/// Test whether the per-node reconstructible subspaces together span the
/// whole state space.
///
/// Two routes must agree: (a) the stacked bases reach full rank n; (b) the
/// block-diagonal complement bases make `diagᵀ(T)(L⊗I)diag(T)` positive
/// definite, which holds exactly when the complements intersect trivially.
/// Disagreement signals a tolerance bug and is reported as an error.
pub fn collective_strong_detectability(
    g: &CommGraph,
    bases: &[Matrix],
    tol: RankTolerance,
) -> Result<CollectiveDetectability> {
    if bases.len() != g.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} bases for {} graph nodes",
            bases.len(),
            g.node_count()
        )));
    }
    if !is_connected(g) {
        return Err(Error::PreconditionViolated(
            "collective strong detectability test needs a connected graph".into(),
        ));
    }
    let n = bases
        .first()
        .map(Matrix::nrows)
        .ok_or_else(|| Error::InvalidParameter("no bases supplied".into()))?;
    for (i, b) in bases.iter().enumerate() {
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "basis {i} has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if (b.transpose() * b - Matrix::identity(b.ncols(), b.ncols())).norm() > 1e-8 {
            return Err(Error::PreconditionViolated(format!(
                "basis {i} does not have orthonormal columns"
            )));
        }
    }

    // Route (a): rank of the stacked bases.
    let total_cols: usize = bases.iter().map(Matrix::ncols).sum();
    let mut stacked = Matrix::zeros(n, total_cols);
    let mut col = 0;
    for b in bases {
        stacked.view_mut((0, col), (n, b.ncols())).copy_from(b);
        col += b.ncols();
    }
    let stacked_rank = matrix::rank(&stacked, tol);
    let rank_route = stacked_rank == n;

    // Route (b): positive definiteness of the complement Gramian.
    let complements: Vec<Matrix> = bases
        .iter()
        .map(|b| matrix::orthonormal_complement(b, tol))
        .collect::<Result<_>>()?;
    let comp_cols: usize = complements.iter().map(Matrix::ncols).sum();
    let big_n = g.node_count();
    let mut diag = Matrix::zeros(big_n * n, comp_cols);
    let mut row = 0;
    let mut ccol = 0;
    for c in &complements {
        diag.view_mut((row, ccol), (n, c.ncols())).copy_from(c);
        row += n;
        ccol += c.ncols();
    }
    let kron = laplacian(g).kronecker(&Matrix::identity(n, n));
    let gramian = diag.transpose() * kron * &diag;
    let min_eig = matrix::min_symmetric_eigenvalue(&gramian);
    let scale = if gramian.nrows() == 0 { 1.0 } else { gramian.norm().max(1.0) };
    let gramian_route = min_eig > tol.cutoff(scale);

    if rank_route != gramian_route {
        return Err(Error::InconsistentChecks(format!(
            "stacked rank {stacked_rank}/{n} vs Gramian min eigenvalue {min_eig:.3e}"
        )));
    }
    Ok(CollectiveDetectability {
        holds: rank_route,
        stacked_rank,
        gramian_min_eig: min_eig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> RankTolerance {
        RankTolerance::default()
    }

    #[test]
    fn laplacian_of_single_edge() {
        let g = CommGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        let l = laplacian(&g);
        let expected = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!((l - expected).norm() < 1e-12);
    }

    #[test]
    fn laplacian_of_edgeless_graph_is_zero() {
        let g = CommGraph::new(3, &[]).unwrap();
        assert!(laplacian(&g).norm() == 0.0);
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_spectrum_nonnegative() {
        let g = CommGraph::new(
            5,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 0, 1.0)],
        )
        .unwrap();
        let l = laplacian(&g);
        for i in 0..5 {
            let row_sum: f64 = (0..5).map(|j| l[(i, j)]).sum();
            assert!(row_sum.abs() < 1e-12);
        }
        assert!((&l - l.transpose()).norm() < 1e-12);
        let min = matrix::min_symmetric_eigenvalue(&l);
        assert!(min.abs() < 1e-10, "smallest eigenvalue should be 0, got {min}");
    }

    #[test]
    fn path_graph_is_connected() {
        let g = CommGraph::new(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(is_connected(&g));
        assert!(algebraic_connectivity(&g) > 0.0);
    }

    #[test]
    fn disjoint_edges_are_disconnected() {
        let g = CommGraph::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(!is_connected(&g));
        assert!(algebraic_connectivity(&g).abs() < 1e-10);
    }

    #[test]
    fn rejects_self_loops_and_bad_weights() {
        assert!(CommGraph::new(2, &[(0, 0, 1.0)]).is_err());
        assert!(CommGraph::new(2, &[(0, 1, 0.0)]).is_err());
        assert!(CommGraph::new(2, &[(0, 1, -1.0)]).is_err());
        assert!(CommGraph::new(2, &[(0, 5, 1.0)]).is_err());
    }

    #[test]
    fn complementary_axis_bases_cover_plane() {
        let g = CommGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        let e1 = Matrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let e2 = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let out = collective_strong_detectability(&g, &[e1, e2], tol()).unwrap();
        assert!(out.holds);
        assert_eq!(out.stacked_rank, 2);
        assert!(out.gramian_min_eig > 0.0);
    }

    #[test]
    fn duplicated_basis_leaves_a_gap() {
        let g = CommGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        let e1 = Matrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let out = collective_strong_detectability(&g, &[e1.clone(), e1], tol()).unwrap();
        assert!(!out.holds);
        assert_eq!(out.stacked_rank, 1);
        assert!(out.gramian_min_eig.abs() < 1e-9);
    }
}
