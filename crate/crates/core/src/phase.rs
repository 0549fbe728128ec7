//! Phase spaces, phase functions and Poisson brackets.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{antisymmetry_residual, canonical_symplectic, max_abs, rank_tol, DenseMatrix, Tolerance, Vector};

/// Default relative step for central finite differences.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpec {
    pub n_pairs: usize,
    /// Bracket matrix `J` with `[z^a, z^b] = J^{ab}`.
    pub poisson: DenseMatrix,
    pub labels: Option<Vec<String>>,
}

impl PhaseSpec {
    /// Canonical structure on `n_pairs` pairs labelled `q1..qN, p1..pN`.
    pub fn canonical(n_pairs: usize) -> Self {
        let labels = (1..=n_pairs)
            .map(|i| format!("q{i}"))
            .chain((1..=n_pairs).map(|i| format!("p{i}")))
            .collect();
        PhaseSpec { n_pairs, poisson: canonical_symplectic(n_pairs), labels: Some(labels) }
    }

    pub fn with_poisson(n_pairs: usize, poisson: DenseMatrix, tol: &Tolerance) -> Result<Self> {
        let dim = 2 * n_pairs;
        if poisson.shape() != (dim, dim) {
            return Err(Error::InvalidInput(format!(
                "poisson must be {dim}x{dim}, got {}x{}",
                poisson.nrows(),
                poisson.ncols()
            )));
        }
        if antisymmetry_residual(&poisson) > tol.weak_bound(max_abs(&poisson)) {
            return Err(Error::InvalidInput("poisson matrix is not antisymmetric".into()));
        }
        let rank = rank_tol(&poisson, tol)?;
        if rank != dim {
            return Err(Error::InvalidInput(format!("poisson matrix has rank {rank}, expected {dim}")));
        }
        let mut spec = PhaseSpec::canonical(n_pairs);
        spec.poisson = poisson;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.poisson.nrows()
    }

    pub fn label(&self, i: usize) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.get(i).cloned())
            .unwrap_or_else(|| format!("z{i}"))
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub z: Vector,
}

impl PhasePoint {
    pub fn new(z: Vector) -> Self {
        PhasePoint { z }
    }

    pub fn from_slice(z: &[f64]) -> Self {
        PhasePoint { z: Vector::from_column_slice(z) }
    }

    pub fn origin(dim: usize) -> Self {
        PhasePoint { z: Vector::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

type Evaluator = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// A real function on phase space.
#[derive(Clone)]
pub enum PhaseFunction {
    /// `b·z + c`.
    Affine { b: Vector, c: f64 },
    /// `½ zᵀQz + b·z + c` with symmetric `Q`.
    Quadratic { q: DenseMatrix, b: Vector, c: f64 },
    /// Black-box evaluator on a space of dimension `dim`; gradients by finite differences
    /// unless an analytic gradient is supplied.
    Opaque { dim: usize, eval: Evaluator, grad: Option<GradientFn> },
}

impl fmt::Debug for PhaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseFunction::Affine { b, c } => f.debug_struct("Affine").field("b", b).field("c", c).finish(),
            PhaseFunction::Quadratic { q, b, c } => {
                f.debug_struct("Quadratic").field("q", q).field("b", b).field("c", c).finish()
            }
            PhaseFunction::Opaque { dim, .. } => f.debug_struct("Opaque").field("dim", dim).finish(),
        }
    }
}

impl PhaseFunction {
    pub fn affine(b: Vector, c: f64) -> Self {
        PhaseFunction::Affine { b, c }
    }

    /// Coordinate function `z^i` on a space of dimension `dim`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut b = Vector::zeros(dim);
        b[i] = 1.0;
        PhaseFunction::Affine { b, c: 0.0 }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        PhaseFunction::Affine { b: Vector::zeros(dim), c }
    }

    /// Quadratic function; `q` is symmetrized, which leaves the function unchanged.
    pub fn quadratic(q: DenseMatrix, b: Vector, c: f64) -> Result<Self> {
        if !q.is_square() || q.nrows() != b.len() {
            return Err(Error::InvalidInput("quadratic form and linear term have mismatched sizes".into()));
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(PhaseFunction::Quadratic { q, b, c })
    }

    pub fn opaque(dim: usize, eval: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        PhaseFunction::Opaque { dim, eval: Arc::new(eval), grad: None }
    }

    pub fn opaque_with_gradient(
        dim: usize,
        eval: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        PhaseFunction::Opaque { dim, eval: Arc::new(eval), grad: Some(Arc::new(grad)) }
    }

    pub fn dim(&self) -> usize {
        match self {
            PhaseFunction::Affine { b, .. } => b.len(),
            PhaseFunction::Quadratic { b, .. } => b.len(),
            PhaseFunction::Opaque { dim, .. } => *dim,
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, PhaseFunction::Affine { .. })
    }

    fn check_dim(&self, z: &Vector) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "function on dimension {} evaluated at point of dimension {}",
                self.dim(),
                z.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, at: &PhasePoint) -> Result<f64> {
        self.check_dim(&at.z)?;
        Ok(self.eval_unchecked(&at.z))
    }

    fn eval_unchecked(&self, z: &Vector) -> f64 {
        match self {
            PhaseFunction::Affine { b, c } => b.dot(z) + c,
            PhaseFunction::Quadratic { q, b, c } => 0.5 * z.dot(&(q * z)) + b.dot(z) + c,
            PhaseFunction::Opaque { eval, .. } => eval(z),
        }
    }

    /// Closed-form gradient for affine and quadratic kinds, central differences otherwise.
    pub fn gradient(&self, at: &PhasePoint) -> Result<Vector> {
        self.check_dim(&at.z)?;
        Ok(match self {
            PhaseFunction::Affine { b, .. } => b.clone(),
            PhaseFunction::Quadratic { q, b, .. } => q * &at.z + b,
            PhaseFunction::Opaque { grad: Some(g), .. } => g(&at.z),
            PhaseFunction::Opaque { grad: None, .. } => fd_gradient(self, &at.z, DEFAULT_FD_STEP),
        })
    }

    /// The same function viewed on a space with `extra` trailing coordinates it does not depend on.
    pub fn extend(&self, extra: usize) -> Self {
        self.extend_with_linear(&Vector::zeros(extra))
    }

    /// `f(z) + w·y` on the space `(z, y)` with `y` of length `w.len()`.
    pub fn extend_with_linear(&self, w: &Vector) -> Self {
        let n = self.dim();
        let k = w.len();
        match self {
            PhaseFunction::Affine { b, c } => {
                let mut nb = Vector::zeros(n + k);
                nb.rows_mut(0, n).copy_from(b);
                nb.rows_mut(n, k).copy_from(w);
                PhaseFunction::Affine { b: nb, c: *c }
            }
            PhaseFunction::Quadratic { q, b, c } => {
                let mut nq = DenseMatrix::zeros(n + k, n + k);
                nq.view_mut((0, 0), (n, n)).copy_from(q);
                let mut nb = Vector::zeros(n + k);
                nb.rows_mut(0, n).copy_from(b);
                nb.rows_mut(n, k).copy_from(w);
                PhaseFunction::Quadratic { q: nq, b: nb, c: *c }
            }
            PhaseFunction::Opaque { eval, grad, .. } => {
                let eval = eval.clone();
                let w_eval = w.clone();
                let eval = move |x: &Vector| eval(&x.rows(0, n).into_owned()) + w_eval.dot(&x.rows(n, k));
                match grad {
                    Some(grad) => {
                        let grad = grad.clone();
                        let w = w.clone();
                        PhaseFunction::opaque_with_gradient(n + k, eval, move |x: &Vector| {
                            let mut out = Vector::zeros(n + k);
                            out.rows_mut(0, n).copy_from(&grad(&x.rows(0, n).into_owned()));
                            out.rows_mut(n, k).copy_from(&w);
                            out
                        })
                    }
                    None => PhaseFunction::opaque(n + k, eval),
                }
            }
        }
    }
}

/// Central-difference gradient with per-coordinate step `step·(1 + |z_i|)`.
pub fn gradient_fd(f: &PhaseFunction, at: &PhasePoint, step: f64) -> Result<Vector> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step {step} must be positive")));
    }
    f.check_dim(&at.z)?;
    Ok(fd_gradient(f, &at.z, step))
}

fn fd_gradient(f: &PhaseFunction, z: &Vector, step: f64) -> Vector {
    let mut g = Vector::zeros(z.len());
    let mut x = z.clone();
    for i in 0..z.len() {
        let h = step * (1.0 + z[i].abs());
        x[i] = z[i] + h;
        let up = f.eval_unchecked(&x);
        x[i] = z[i] - h;
        let down = f.eval_unchecked(&x);
        x[i] = z[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// `∇f(at) · J · ∇g(at)`.
pub fn poisson_bracket(f: &PhaseFunction, g: &PhaseFunction, at: &PhasePoint, spec: &PhaseSpec) -> Result<f64> {
    if at.dim() != spec.dim() {
        return Err(Error::InvalidInput(format!(
            "point of dimension {} on phase space of dimension {}",
            at.dim(),
            spec.dim()
        )));
    }
    let gf = f.gradient(at)?;
    let gg = g.gradient(at)?;
    Ok(gf.dot(&(&spec.poisson * gg)))
}

/// Fundamental bracket matrix `J − (J Gᵀ) M (G J)` of a Dirac-type bracket.
///
/// Row `α` of `g` is the gradient of the `α`-th constraint and `m` is the contracting matrix.
pub fn dirac_matrix(poisson: &DenseMatrix, g: &DenseMatrix, m: &DenseMatrix) -> DenseMatrix {
    let jg = poisson * g.transpose();
    let gj = g * poisson;
    poisson - jg * m * gj
}

/// `∇f · P · ∇g` for a fundamental bracket matrix `P`.
pub fn bracket_with(p: &DenseMatrix, f: &PhaseFunction, g: &PhaseFunction, at: &PhasePoint) -> Result<f64> {
    if p.nrows() != at.dim() {
        return Err(Error::InvalidInput(format!(
            "bracket matrix of size {} at point of dimension {}",
            p.nrows(),
            at.dim()
        )));
    }
    Ok(f.gradient(at)?.dot(&(p * g.gradient(at)?)))
}
