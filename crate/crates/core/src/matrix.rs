//! Dense real-matrix kernels.
//!
//! Everything here is plain `f64` dense linear algebra at desk scale
//! (n ≤ ~100): orthonormal range bases and annihilators from SVD, a
//! row-space Gram–Schmidt factorization, a Newton–Kleinman Riccati solver,
//! and a direct (Kronecker form) Lyapunov solver. All numerical rank
//! decisions in the crate go through [`RankTolerance`] so that chained
//! rank tests stay mutually consistent.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative threshold for numerical rank decisions.
///
/// A singular value counts toward the rank when it exceeds
/// `relative * max(anchor, largest_singular_value)`. The anchor is zero by
/// default (cutoff relative to the matrix itself); chained computations
/// anchor it to the overall problem scale so that residual blocks which
/// are zero up to roundoff are ranked as zero rather than relative to
/// their own noise floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance {
    relative: f64,
    anchor: f64,
}

impl RankTolerance {
    pub const DEFAULT_RELATIVE: f64 = 1e-9;

    pub fn new(relative: f64) -> Result<Self> {
        if !(relative > 0.0) || !relative.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rank tolerance must be strictly positive and finite, got {relative}"
            )));
        }
        Ok(Self {
            relative,
            anchor: 0.0,
        })
    }

    pub fn relative(&self) -> f64 {
        self.relative
    }

    /// Same relative threshold, with cutoffs floored at `relative * scale`.
    pub fn anchored(&self, scale: f64) -> Self {
        Self {
            relative: self.relative,
            anchor: scale.max(0.0),
        }
    }

    /// Absolute cutoff for a spectrum whose largest singular value is `scale`.
    pub fn cutoff(&self, scale: f64) -> f64 {
        self.relative * scale.max(self.anchor)
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self {
            relative: Self::DEFAULT_RELATIVE,
            anchor: 0.0,
        }
    }
}

/// Reject matrices holding NaN or infinite entries.
pub fn require_finite(name: &str, m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} contains a NaN or infinite entry"
        )))
    }
}

/// Numerical rank from singular values.
pub fn rank(m: &Matrix, tol: RankTolerance) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let scale = sv.iter().cloned().fold(0.0_f64, f64::max);
    sv.iter().filter(|&&s| s > tol.cutoff(scale)).count()
}

/// Orthonormal basis of the column space.
///
/// Returns a matrix with orthonormal columns spanning the range of `m`;
/// the column count equals the numerical rank. A zero (or empty) input
/// yields a result with zero columns.
pub fn orthonormal_range_basis(m: &Matrix, tol: RankTolerance) -> Matrix {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return Matrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd was asked for u");
    let sv = &svd.singular_values;
    let scale = sv.iter().cloned().fold(0.0_f64, f64::max);
    let cut = tol.cutoff(scale);
    let cols: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > cut).collect();
    u.select_columns(&cols)
}

/// Orthonormal basis of the orthogonal complement of the span of `q`.
///
/// `q` is expected to have orthonormal columns; the result `c` satisfies
/// `cᵀc = I` and `qᵀc = 0`, with `q.nrows() - q.ncols()` columns.
pub fn orthonormal_complement(q: &Matrix, tol: RankTolerance) -> Result<Matrix> {
    let n = q.nrows();
    let k = q.ncols();
    if k == 0 {
        return Ok(Matrix::identity(n, n));
    }
    // Projector onto the complement has singular values 1 (complement) and
    // ~0 (span); anchoring the cutoff at unit scale keeps a numerically
    // zero projector from being ranked relative to its own noise floor.
    let projector = Matrix::identity(n, n) - q * q.transpose();
    let comp = orthonormal_range_basis(&projector, tol.anchored(1.0));
    if comp.ncols() != n - k {
        return Err(Error::Internal(format!(
            "complement of a {n}x{k} orthonormal basis had {} columns (input not orthonormal?)",
            comp.ncols()
        )));
    }
    Ok(comp)
}

/// Annihilator: orthonormal rows spanning the left null space of `m`.
///
/// Satisfies `annihilator(m) * m = 0` with `rows(m) - rank(m)` rows. A
/// matrix with full row rank yields an empty (0-row) result. By
/// convention, a matrix with zero columns is annihilated by the full
/// identity; this keeps the chained decomposition uniform when an
/// unknown-input block is absent.
pub fn annihilator(m: &Matrix, tol: RankTolerance) -> Result<Matrix> {
    let rows = m.nrows();
    if rows == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    if m.ncols() == 0 {
        return Ok(Matrix::identity(rows, rows));
    }
    let range = orthonormal_range_basis(m, tol);
    let comp = orthonormal_complement(&range, tol)?;
    Ok(comp.transpose())
}

/// Row-space Gram–Schmidt: factor `m` (full row rank) as `ttilde * m = tᵀ`
/// with `ttilde` nonsingular and the columns of `t` orthonormal.
///
/// Signs are normalized so that a row already of positive leading scale
/// keeps its direction (classical Gram–Schmidt behaviour).
pub fn gram_schmidt_rowspace(m: &Matrix, tol: RankTolerance) -> Result<(Matrix, Matrix)> {
    let rows = m.nrows();
    if rows == 0 {
        return Ok((Matrix::zeros(0, 0), Matrix::zeros(m.ncols(), 0)));
    }
    if rank(m, tol) < rows {
        return Err(Error::RankDeficient(format!(
            "row-space orthonormalization needs full row rank, got rank {} < {rows}",
            rank(m, tol)
        )));
    }
    let qr = m.transpose().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    // Flip signs so the triangular factor has a positive diagonal.
    for i in 0..rows {
        if r[(i, i)] < 0.0 {
            for j in 0..r.ncols() {
                r[(i, j)] = -r[(i, j)];
            }
            for k in 0..q.nrows() {
                q[(k, i)] = -q[(k, i)];
            }
        }
    }
    let ttilde = r
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("triangular factor not invertible".into()))?;
    Ok((ttilde, q))
}

/// Which algebraic Riccati equation to solve.
///
/// * `Observer`: `(A+sI)X + X(A+sI)ᵀ − XCᵀCX + Q = 0` (second argument is C)
/// * `Control`:  `(A+sI)ᵀX + X(A+sI) − XBBᵀX + Q = 0` (second argument is B)
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CareForm {
    Observer,
    Control,
}

/// Stabilizing solution of an algebraic Riccati equation by Newton–Kleinman
/// iteration; every Newton step is one Lyapunov solve. The initial
/// stabilizing gain comes from Bass' shifted-Lyapunov construction.
pub fn solve_care(a: &Matrix, bc: &Matrix, q: &Matrix, shift: f64, form: CareForm) -> Result<Matrix> {
    match form {
        CareForm::Control => care_control(a, bc, q, shift),
        CareForm::Observer => care_control(&a.transpose(), &bc.transpose(), q, shift),
    }
}

fn care_control(a: &Matrix, b: &Matrix, q: &Matrix, shift: f64) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("Riccati: A must be square".into()));
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "Riccati: B must have {n} rows, got {}",
            b.nrows()
        )));
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Riccati: Q must be {n}x{n}"
        )));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let a_s = a + Matrix::identity(n, n) * shift;

    let mut k = if spectral_abscissa(&a_s) < 0.0 {
        Matrix::zeros(b.ncols(), n)
    } else {
        bass_stabilizing_gain(&a_s, b)?
    };

    let mut x = Matrix::zeros(n, n);
    let mut converged = false;
    for _ in 0..100 {
        let a_cl = &a_s - b * &k;
        let forcing = k.transpose() * &k + q;
        let mut x_new = lyap_kronecker(&a_cl, &forcing)?;
        x_new = symmetrize(&x_new);
        let k_new = b.transpose() * &x_new;
        let step = (&k_new - &k).norm();
        x = x_new;
        k = k_new;
        if step <= 1e-13 * k.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotStabilizable(
            "Newton iteration did not converge".into(),
        ));
    }
    let residual = (a_s.transpose() * &x + &x * &a_s - &x * b * b.transpose() * &x + q).norm();
    if residual > 1e-8 {
        return Err(Error::NotStabilizable(format!(
            "converged iterate has residual {residual:.3e}"
        )));
    }
    if b.ncols() > 0 && spectral_abscissa(&(&a_s - b * b.transpose() * &x)) >= 0.0 {
        return Err(Error::NotStabilizable(
            "converged solution is not stabilizing".into(),
        ));
    }
    Ok(x)
}

/// Bass construction: with β above the spectral radius of `a`, the solution
/// W of `(a+βI)W + W(a+βI)ᵀ = 2BBᵀ` yields the stabilizing gain `K = BᵀW⁺`.
fn bass_stabilizing_gain(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let beta = a.norm() + 0.5;
    let shifted = a + Matrix::identity(n, n) * beta;
    let w = lyap_kronecker(&shifted.transpose(), &(-2.0 * b * b.transpose()))?;
    let k = b.transpose() * pseudo_inverse(&symmetrize(&w), RankTolerance::default());
    if spectral_abscissa(&(a - b * &k)) >= 0.0 {
        return Err(Error::NotStabilizable(
            "Bass initialization produced no stabilizing gain (pair not stabilizable?)".into(),
        ));
    }
    Ok(k)
}

pub(crate) fn pseudo_inverse(m: &Matrix, tol: RankTolerance) -> Matrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Matrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let scale = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    svd.pseudo_inverse(tol.cutoff(scale).max(f64::MIN_POSITIVE))
        .expect("svd requested both factors")
}

/// Unique positive definite solution of `fᵀp + pf + q = 0` for stable `f`
/// and symmetric positive definite `q`.
pub fn solve_lyapunov(f: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = f.nrows();
    if f.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(
            "Lyapunov: F and Q must be square of equal size".into(),
        ));
    }
    if (q - q.transpose()).norm() > 1e-9 * q.norm().max(1.0) {
        return Err(Error::InvalidParameter("Lyapunov: Q must be symmetric".into()));
    }
    if spectral_abscissa(f) >= 0.0 {
        return Err(Error::UnstableF);
    }
    let p = symmetrize(&lyap_kronecker(f, q)?);
    let residual = (f.transpose() * &p + &p * f + q).norm();
    if residual > 1e-9 * q.norm().max(1.0) {
        return Err(Error::Internal(format!(
            "Lyapunov residual {residual:.3e} above bound"
        )));
    }
    Ok(p)
}

/// Direct Kronecker-form solve of `fᵀp + pf + q = 0`. Solvable whenever no
/// two eigenvalues of `f` sum to zero; no stability requirement.
fn lyap_kronecker(f: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = f.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let eye = Matrix::identity(n, n);
    let ft = f.transpose();
    let op = eye.kronecker(&ft) + ft.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Internal("Lyapunov operator is singular".into()))?;
    Ok(Matrix::from_column_slice(n, n, sol.as_slice()))
}

fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Concatenate blocks left to right. All blocks must share a row count;
/// an empty list yields a 0x0 matrix.
pub(crate) fn hstack(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack: inconsistent row counts");
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Concatenate blocks top to bottom. All blocks must share a column count.
pub(crate) fn vstack(blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: inconsistent column counts");
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(*b);
        at += b.nrows();
    }
    out
}

/// All eigenvalues of a real square matrix.
///
/// The plain QR iteration stalls on exactly structured inputs (nilpotent
/// Jordan chains are the common case here), so the Schur pass runs with a
/// bounded iteration count and falls back to a deterministic orthogonal
/// similarity that breaks the structure without moving the spectrum.
pub fn eigenvalues(m: &Matrix) -> Vec<Complex<f64>> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigenvalues need a square matrix");
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Complex::new(m[(0, 0)], 0.0)];
    }
    if let Some(schur) = m.clone().try_schur(f64::EPSILON, 100 * n) {
        return schur.complex_eigenvalues().iter().cloned().collect();
    }
    for attempt in 1..=4u64 {
        let q = seeded_orthogonal(n, attempt);
        let rotated = &q * m * q.transpose();
        if let Some(schur) = rotated.try_schur(f64::EPSILON, 500 * n) {
            return schur.complex_eigenvalues().iter().cloned().collect();
        }
    }
    panic!("eigenvalue iteration failed to converge for a {n}x{n} matrix");
}

/// Deterministic "random" orthogonal matrix: QR factor of a matrix filled
/// by a fixed linear congruential sequence.
fn seeded_orthogonal(n: usize, seed: u64) -> Matrix {
    let mut state = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        // Map the top bits to (-1, 1).
        ((state >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
    };
    let raw = Matrix::from_fn(n, n, |_, _| next());
    let q = raw.qr().q();
    if q.ncols() == n {
        q
    } else {
        Matrix::identity(n, n)
    }
}

/// Real parts of all eigenvalues, sorted descending.
pub fn spectrum_real_parts(m: &Matrix) -> Vec<f64> {
    let mut re: Vec<f64> = eigenvalues(m).iter().map(|z| z.re).collect();
    re.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalue real parts are finite"));
    re
}

/// Largest eigenvalue real part; `-inf` for an empty matrix.
pub fn spectral_abscissa(m: &Matrix) -> f64 {
    spectrum_real_parts(m)
        .first()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// True iff the column spans of `ta` and `tb` coincide:
/// `rank([ta tb]) = rank(ta) = rank(tb)`.
pub fn spans_equal(ta: &Matrix, tb: &Matrix, tol: RankTolerance) -> Result<bool> {
    if ta.nrows() != tb.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "span comparison needs equal row counts, got {} and {}",
            ta.nrows(),
            tb.nrows()
        )));
    }
    let ra = rank(ta, tol);
    let rb = rank(tb, tol);
    if ra != rb {
        return Ok(false);
    }
    let mut stacked = Matrix::zeros(ta.nrows(), ta.ncols() + tb.ncols());
    stacked.view_mut((0, 0), (ta.nrows(), ta.ncols())).copy_from(ta);
    stacked
        .view_mut((0, ta.ncols()), (tb.nrows(), tb.ncols()))
        .copy_from(tb);
    Ok(rank(&stacked, tol) == ra)
}

/// Largest principal angle (radians) between the column spans of `ta` and
/// `tb`, computed from the spectral norm of the projector difference.
/// Spans of different dimension are maximally apart (π/2).
pub fn subspace_angle(ta: &Matrix, tb: &Matrix, tol: RankTolerance) -> Result<f64> {
    if ta.nrows() != tb.nrows() {
        return Err(Error::DimensionMismatch(
            "subspace angle needs equal row counts".into(),
        ));
    }
    let qa = orthonormal_range_basis(ta, tol);
    let qb = orthonormal_range_basis(tb, tol);
    if qa.ncols() != qb.ncols() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    if qa.ncols() == 0 {
        return Ok(0.0);
    }
    let diff = &qa * qa.transpose() - &qb * qb.transpose();
    let sine = diff
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    Ok(sine.clamp(0.0, 1.0).asin())
}
