//! Tolerance-aware dense linear algebra: ranks, pseudoinverses, null spaces, skew solves.

use nalgebra as na;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DenseMatrix = na::DMatrix<f64>;
pub type Vector = na::DVector<f64>;

/// Numerical thresholds used for rank decisions, weak equalities and surface membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Relative singular-value cutoff.
    pub rank_rel: f64,
    /// Threshold for on-surface equalities.
    pub weak_eq: f64,
    /// Constraint-satisfaction threshold for surface points.
    pub surface: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rank_rel: 1e-10, weak_eq: 1e-8, surface: 1e-10 }
    }
}

impl Tolerance {
    pub fn new(rank_rel: f64, weak_eq: f64, surface: f64) -> Result<Self> {
        let t = Tolerance { rank_rel, weak_eq, surface };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rank_rel", self.rank_rel), ("weak_eq", self.weak_eq), ("surface", self.surface)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameters(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if self.rank_rel > self.weak_eq {
            return Err(Error::InvalidParameters(format!(
                "rank_rel = {} exceeds weak_eq = {}",
                self.rank_rel, self.weak_eq
            )));
        }
        Ok(())
    }

    /// Scale-aware bound for a residual between operands of the given size.
    pub fn weak_bound(&self, scale: f64) -> f64 {
        self.weak_eq * (1.0 + scale)
    }
}

pub fn ensure_finite(m: &DenseMatrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{}x{} matrix has non-finite entries", m.nrows(), m.ncols())))
    }
}

/// Largest absolute entry, zero for empty matrices.
pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Largest absolute entry of `a - b`.
pub fn max_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_diff");
    a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Residual of `a ≈ b` and whether it meets the weak-equality bound.
pub fn weak_equal(a: &DenseMatrix, b: &DenseMatrix, tol: &Tolerance) -> (f64, bool) {
    let r = max_diff(a, b);
    (r, r <= tol.weak_bound(max_abs(a).max(max_abs(b))))
}

pub fn antisymmetry_residual(m: &DenseMatrix) -> f64 {
    max_diff(m, &m.transpose().map(|x| -x))
}

/// Exact antisymmetric part `(m - mᵀ)/2`.
pub fn antisymmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m - m.transpose()) * 0.5
}

/// Canonical symplectic matrix `[[0, I], [-I, 0]]` of size `2n`.
pub fn canonical_symplectic(n: usize) -> DenseMatrix {
    let mut j = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

pub fn block_diag(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Assembles `[[a, b], [c, d]]`.
pub fn block2x2(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, d: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(c.nrows(), d.nrows());
    assert_eq!(a.ncols(), c.ncols());
    assert_eq!(b.ncols(), d.ncols());
    let mut out = DenseMatrix::zeros(a.nrows() + c.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out.view_mut((a.nrows(), 0), c.shape()).copy_from(c);
    out.view_mut((a.nrows(), a.ncols()), d.shape()).copy_from(d);
    out
}

pub fn random_gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_antisymmetric<R: Rng>(n: usize, rng: &mut R) -> DenseMatrix {
    antisymmetrize(&random_gaussian(n, n, rng))
}

struct Decomposition {
    u: DenseMatrix,
    sigma: Vec<f64>,
    v_t: DenseMatrix,
}

#[derive(Clone, Copy)]
enum Vectors {
    None,
    Thin,
    Full,
}

fn svd(m: &DenseMatrix, vectors: Vectors) -> Result<Decomposition> {
    let (r, c) = m.shape();
    let k = r.min(c);
    let (job, ucols, vtrows) = match vectors {
        Vectors::None => (b'N', 0, 0),
        Vectors::Thin => (b'S', k, k),
        Vectors::Full => (b'A', r, c),
    };
    let mut a = m.clone();
    let mut sigma = vec![0.0; k];
    let mut u = DenseMatrix::zeros(r, ucols);
    let mut v_t = DenseMatrix::zeros(vtrows, c);
    let mut iwork = vec![0_i32; 8 * k.max(1)];
    let (ri, ci) = (r as i32, c as i32);
    let ldu = r.max(1) as i32;
    let ldvt = vtrows.max(1) as i32;
    let mut info = 0;
    let mut query = [0.0];
    let mut u_buf = if ucols == 0 { vec![0.0; 1] } else { Vec::new() };
    let mut vt_buf = if vtrows == 0 { vec![0.0; 1] } else { Vec::new() };
    {
        let u_slice = if ucols == 0 { u_buf.as_mut_slice() } else { u.as_mut_slice() };
        let vt_slice = if vtrows == 0 { vt_buf.as_mut_slice() } else { v_t.as_mut_slice() };
        // SAFETY: every buffer is sized for the dimensions passed alongside it.
        unsafe {
            lapack::dgesdd(
                job, ri, ci, a.as_mut_slice(), ri.max(1), &mut sigma, u_slice, ldu, vt_slice, ldvt, &mut query, -1,
                &mut iwork, &mut info,
            );
        }
        let lwork = query[0] as usize;
        let mut work = vec![0.0; lwork.max(1)];
        // SAFETY: as above, with a workspace of the size LAPACK requested.
        unsafe {
            lapack::dgesdd(
                job, ri, ci, a.as_mut_slice(), ri.max(1), &mut sigma, u_slice, ldu, vt_slice, ldvt, &mut work,
                lwork.max(1) as i32, &mut iwork, &mut info,
            );
        }
    }
    if info != 0 {
        return Err(Error::Degenerate(format!("SVD of a {r}x{c} matrix failed (LAPACK info {info})")));
    }
    Ok(Decomposition { u, sigma, v_t })
}

fn cutoff(sigma: &[f64], tol: &Tolerance) -> f64 {
    tol.rank_rel * sigma.iter().fold(0.0_f64, |a, &s| a.max(s))
}

/// Singular values in descending order.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    ensure_finite(m)?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    Ok(svd(m, Vectors::None)?.sigma)
}

/// Number of singular values above `rank_rel` times the largest one.
pub fn rank_tol(m: &DenseMatrix, tol: &Tolerance) -> Result<usize> {
    ensure_finite(m)?;
    if m.is_empty() {
        return Ok(0);
    }
    let sigma = svd(m, Vectors::None)?.sigma;
    let smax = sigma.iter().fold(0.0_f64, |a, &s| a.max(s));
    if smax == 0.0 {
        return Ok(0);
    }
    let c = cutoff(&sigma, tol);
    Ok(sigma.iter().filter(|&&s| s > c).count())
}

/// Moore–Penrose pseudoinverse with the relative rank cutoff.
pub fn pseudoinverse(m: &DenseMatrix, tol: &Tolerance) -> Result<DenseMatrix> {
    Ok(pseudoinverse_with_rank(m, tol)?.0)
}

fn pseudoinverse_with_rank(m: &DenseMatrix, tol: &Tolerance) -> Result<(DenseMatrix, usize)> {
    ensure_finite(m)?;
    let (r, c) = m.shape();
    if m.is_empty() {
        return Ok((DenseMatrix::zeros(c, r), 0));
    }
    let d = svd(m, Vectors::Thin)?;
    let cut = cutoff(&d.sigma, tol);
    let keep: Vec<usize> = (0..d.sigma.len()).filter(|&k| d.sigma[k] > cut && d.sigma[k] > 0.0).collect();
    if keep.is_empty() {
        return Ok((DenseMatrix::zeros(c, r), 0));
    }
    let mut v_scaled = d.v_t.select_rows(&keep).transpose();
    for (j, &k) in keep.iter().enumerate() {
        v_scaled.column_mut(j).scale_mut(1.0 / d.sigma[k]);
    }
    Ok((v_scaled * d.u.select_columns(&keep).transpose(), keep.len()))
}

/// Orthonormal basis of the numerical right null space, one column per null direction.
pub fn null_basis(m: &DenseMatrix, tol: &Tolerance) -> Result<DenseMatrix> {
    ensure_finite(m)?;
    let (r, c) = m.shape();
    if c == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    if r == 0 {
        return Ok(DenseMatrix::identity(c, c));
    }
    let d = svd(m, Vectors::Full)?;
    let smax = d.sigma.iter().fold(0.0_f64, |a, &s| a.max(s));
    let cut = cutoff(&d.sigma, tol);
    let cols: Vec<Vector> = (0..c)
        .filter(|&k| smax == 0.0 || d.sigma.get(k).is_none_or(|&s| s <= cut))
        .map(|k| d.v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        return Ok(DenseMatrix::zeros(c, 0));
    }
    Ok(DenseMatrix::from_columns(&cols))
}

/// Inverse of a square matrix that must have full numerical rank.
pub fn inverse_full_rank(m: &DenseMatrix, tol: &Tolerance, what: &str) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!("{what} is not square")));
    }
    let (inv, rank) = pseudoinverse_with_rank(m, tol)?;
    if rank != m.nrows() {
        return Err(Error::Degenerate(format!("{what} has rank {rank}, expected {}", m.nrows())));
    }
    Ok(inv)
}

/// Largest operand for which the dense least-squares fallback of [`skew_solve`] is attempted.
pub const SKEW_LSQ_MAX: usize = 64;

/// Antisymmetric `M` with `M·c ≈ target`.
///
/// Tries the pseudoinverse of `c`, then `target · c⁺ · targetᵀ`, and finally (for small operands)
/// a least-squares problem over antisymmetric matrices.
pub fn skew_solve(c: &DenseMatrix, target: &DenseMatrix, tol: &Tolerance) -> Result<DenseMatrix> {
    ensure_finite(c)?;
    ensure_finite(target)?;
    let n = c.nrows();
    if !c.is_square() || target.shape() != (n, n) {
        return Err(Error::InvalidInput(format!(
            "skew_solve needs square operands of equal size, got {:?} and {:?}",
            c.shape(),
            target.shape()
        )));
    }
    let scale = max_abs(c);
    if antisymmetry_residual(c) > tol.weak_bound(scale) {
        return Err(Error::InvalidInput("skew_solve operand is not antisymmetric".into()));
    }
    let pinv = pseudoinverse(c, tol)?;
    let range_projector = &pinv * c;
    let bound = tol.weak_bound(max_abs(target));
    let candidate = if max_diff(&range_projector, target) <= bound {
        antisymmetrize(&pinv)
    } else {
        let sandwich = antisymmetrize(&(target * &pinv * target.transpose()));
        let r = max_diff(&(&sandwich * c), target);
        if r <= bound {
            sandwich
        } else if n <= SKEW_LSQ_MAX {
            skew_least_squares(c, target, tol)?
        } else {
            return Err(Error::NoSolution { residual: r });
        }
    };
    let residual = max_diff(&(&candidate * c), target);
    if residual > bound {
        return Err(Error::NoSolution { residual });
    }
    Ok(candidate)
}

fn skew_least_squares(c: &DenseMatrix, target: &DenseMatrix, tol: &Tolerance) -> Result<DenseMatrix> {
    let n = c.nrows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let mut system = DenseMatrix::zeros(n * n, pairs.len());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        // Basis element E = e_i e_jᵀ − e_j e_iᵀ, so (E·c) has row i = c[j,:] and row j = −c[i,:].
        for col in 0..n {
            system[(i * n + col, k)] += c[(j, col)];
            system[(j * n + col, k)] -= c[(i, col)];
        }
    }
    let rhs = Vector::from_fn(n * n, |idx, _| target[(idx / n, idx % n)]);
    let coeffs = pseudoinverse(&system, tol)? * rhs;
    let mut m = DenseMatrix::zeros(n, n);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        m[(i, j)] = coeffs[k];
        m[(j, i)] = -coeffs[k];
    }
    Ok(m)
}
