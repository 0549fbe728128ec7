//! Irreducible reformulation on the extended space `(z, y)`: constraints χ̃, their invertible
//! bracket matrix, the irreducible Dirac bracket, the equivalence chain and equations of motion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::numerics::{
    antisymmetry_residual, block2x2, block_diag, inverse_full_rank, max_abs, max_diff, random_gaussian, rank_tol,
    weak_equal, DenseMatrix, Tolerance, Vector,
};
use crate::oracle::oracle_fundamental;
use crate::phase::{bracket_with, dirac_matrix, PhaseFunction, PhasePoint};
use crate::report::{CheckRecord, CheckReport};
use crate::second_order::{second_order_artifacts, BracketMode, SecondOrderArtifacts};

#[derive(Debug, Clone, PartialEq)]
pub enum EhatChoice {
    Identity,
    /// A user-supplied `Ê`; `ê` is its inverse.
    Custom(DenseMatrix),
}

/// A point `(z, y)` of the extended phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint {
    pub z: Vector,
    pub y: Vector,
}

impl ExtendedPoint {
    pub fn new(z: Vector, y: Vector) -> Self {
        ExtendedPoint { z, y }
    }

    /// `(z, 0)`.
    pub fn on_base(at: &PhasePoint, m1: usize) -> Self {
        ExtendedPoint { z: at.z.clone(), y: Vector::zeros(m1) }
    }

    pub fn to_phase_point(&self) -> PhasePoint {
        let (n, k) = (self.z.len(), self.y.len());
        PhasePoint::new(Vector::from_fn(n + k, |i, _| if i < n { self.z[i] } else { self.y[i - n] }))
    }

    pub fn from_phase_point(p: &PhasePoint, n: usize) -> Self {
        ExtendedPoint { z: p.z.rows(0, n).into_owned(), y: p.z.rows(n, p.dim() - n).into_owned() }
    }
}

#[derive(Debug, Clone)]
pub struct IrreducibleSystem {
    pub base: ConstraintSet,
    pub art: SecondOrderArtifacts,
    /// `[y, y] = ω`.
    pub omega_y: DenseMatrix,
    pub omega_y_inv: DenseMatrix,
    /// `ê`.
    pub ehat: DenseMatrix,
    /// `Ê`, the inverse of `ê`.
    pub ehat_inv: DenseMatrix,
    /// `A^{α₁}_{α₀}` stored M₀×M₁.
    pub a01: DenseMatrix,
    /// M₀ + M₂ functions on the extended space.
    pub chi_tilde: Vec<PhaseFunction>,
    pub c_delta: DenseMatrix,
    pub c_delta_inv: DenseMatrix,
    /// `blockdiag(J, ω)`.
    pub poisson_ext: DenseMatrix,
}

pub fn build_irreducible(
    cs: &ConstraintSet,
    art: &SecondOrderArtifacts,
    choice: &EhatChoice,
    tol: &Tolerance,
) -> Result<IrreducibleSystem> {
    let (m0, m1, m2) = (art.m0(), art.m1(), art.m2());
    let (ehat_inv, ehat, omega_y) = match choice {
        EhatChoice::Identity => (DenseMatrix::identity(m1, m1), DenseMatrix::identity(m1, m1), art.omega_low.clone()),
        EhatChoice::Custom(big) => {
            if big.shape() != (m1, m1) {
                return Err(Error::InvalidInput(format!("Ê must be {m1}x{m1}")));
            }
            let small = inverse_full_rank(big, tol, "Ê")?;
            let (r, ok) = weak_equal(&(big * &art.d11 * &small), &art.d11, tol);
            if !ok {
                return Err(Error::CheckFailed { name: "eq_27qq".into(), residual: r });
            }
            let omega = small.transpose() * &art.omega_low * &small;
            (big.clone(), small, crate::numerics::antisymmetrize(&omega))
        }
    };
    let omega_y_inv = inverse_full_rank(&omega_y, tol, "ω")?;
    let a01 = art.abar01.transpose() * ehat_inv.transpose();
    let n = cs.dim();
    let mut chi_tilde: Vec<PhaseFunction> =
        cs.chi.iter().enumerate().map(|(i, f)| f.extend_with_linear(&a01.row(i).transpose())).collect();
    for k in 0..m2 {
        let mut b = Vector::zeros(n + m1);
        b.rows_mut(n, m1).copy_from(&art.z2.column(k));
        chi_tilde.push(PhaseFunction::affine(b, 0.0));
    }
    let w = &omega_y;
    let c_delta = block2x2(
        &(&art.c2 + &a01 * w * a01.transpose()),
        &(&a01 * w * &art.z2),
        &(art.z2.transpose() * w * a01.transpose()),
        &(art.z2.transpose() * w * &art.z2),
    );
    let wi = &omega_y_inv;
    let right = wi * &art.a12 * art.dbar2.transpose();
    let c_delta_inv = block2x2(
        &art.mu2,
        &(&art.z1 * &ehat * &right),
        &(&art.dbar2 * art.a12.transpose() * wi * ehat.transpose() * art.z1.transpose()),
        &(&art.dbar2 * art.a12.transpose() * &right),
    );
    debug_assert_eq!(c_delta.nrows(), m0 + m2);
    Ok(IrreducibleSystem {
        base: cs.clone(),
        art: art.clone(),
        poisson_ext: block_diag(&cs.spec.poisson, &omega_y),
        omega_y,
        omega_y_inv,
        ehat,
        ehat_inv,
        a01,
        chi_tilde,
        c_delta,
        c_delta_inv,
    })
}

/// Convenience: default artifacts at `at` and the identity `Ê`.
pub fn build_default(cs: &ConstraintSet, at: &PhasePoint, tol: &Tolerance) -> Result<IrreducibleSystem> {
    let art = second_order_artifacts(cs, at, tol)?;
    build_irreducible(cs, &art, &EhatChoice::Identity, tol)
}

impl IrreducibleSystem {
    pub fn n(&self) -> usize {
        self.base.dim()
    }

    pub fn m1(&self) -> usize {
        self.art.m1()
    }

    pub fn ext_dim(&self) -> usize {
        self.n() + self.m1()
    }

    fn check_point(&self, at: &ExtendedPoint) -> Result<()> {
        if at.z.len() != self.n() || at.y.len() != self.m1() {
            return Err(Error::InvalidInput(format!(
                "extended point has dimensions ({}, {}), expected ({}, {})",
                at.z.len(),
                at.y.len(),
                self.n(),
                self.m1()
            )));
        }
        Ok(())
    }

    pub fn chi_tilde_values(&self, at: &ExtendedPoint) -> Result<Vector> {
        self.check_point(at)?;
        let p = at.to_phase_point();
        let v: Result<Vec<f64>> = self.chi_tilde.iter().map(|f| f.eval(&p)).collect();
        Ok(Vector::from_vec(v?))
    }

    pub fn ensure_on_surface(&self, at: &ExtendedPoint, tol: &Tolerance) -> Result<()> {
        let v = self.chi_tilde_values(at)?;
        let (index, residual) =
            v.iter().enumerate().map(|(i, x)| (i, x.abs())).fold((0, 0.0), |a, x| if x.1 > a.1 { x } else { a });
        if residual > tol.surface {
            return Err(Error::OffSurface { index, residual });
        }
        Ok(())
    }

    /// Gradients of χ̃, `[[∇χ, A], [0, Z²ᵀ]]`.
    pub fn gradients(&self, at: &ExtendedPoint) -> Result<DenseMatrix> {
        let p = at.to_phase_point();
        let mut g = DenseMatrix::zeros(self.chi_tilde.len(), self.ext_dim());
        for (i, f) in self.chi_tilde.iter().enumerate() {
            g.set_row(i, &f.gradient(&p)?.transpose());
        }
        Ok(g)
    }

    /// Bracket matrix of χ̃ computed directly from the Poisson structure.
    pub fn c_delta_direct(&self, at: &ExtendedPoint) -> Result<DenseMatrix> {
        let g = self.gradients(at)?;
        Ok(&g * &self.poisson_ext * g.transpose())
    }

    /// Fundamental matrix of the irreducible bracket on `(z, y)`.
    pub fn fundamental_ext(&self, at: &ExtendedPoint) -> Result<DenseMatrix> {
        self.check_point(at)?;
        Ok(dirac_matrix(&self.poisson_ext, &self.gradients(at)?, &self.c_delta_inv))
    }

    /// Fundamental matrix of the intermediate system with constraints `(χ, y)`.
    pub fn fundamental_intermediate(&self, at: &ExtendedPoint) -> Result<DenseMatrix> {
        self.check_point(at)?;
        let g = self.base.gradients(&PhasePoint::new(at.z.clone()))?;
        let m1 = self.m1();
        let gi = block_diag(&g, &DenseMatrix::identity(m1, m1));
        let m = block_diag(&self.art.mu2, &self.omega_y_inv);
        Ok(dirac_matrix(&self.poisson_ext, &gi, &m))
    }

    /// `(χ, y)` rebuilt from χ̃ values alone.
    pub fn recover(&self, chi_tilde: &Vector) -> (Vector, Vector) {
        let m0 = self.art.m0();
        let t0 = chi_tilde.rows(0, m0).into_owned();
        let t2 = chi_tilde.rows(m0, chi_tilde.len() - m0).into_owned();
        let chi = self.art.d00.transpose() * &t0;
        let y = self.ehat.transpose() * self.art.z1.transpose() * &t0 + &self.art.a12 * self.art.dbar2.transpose() * t2;
        (chi, y)
    }

    pub fn checks(&self, tol: &Tolerance, seed: u64) -> Result<Vec<CheckRecord>> {
        let m1 = self.m1();
        let nd = self.c_delta.nrows();
        let rec = |name: &str, r: f64| CheckRecord::bound(name, r, tol.weak_eq);
        let id = |n: usize| DenseMatrix::identity(n, n);
        let at = ExtendedPoint::on_base(&self.art.point, m1);
        let mut out = vec![
            CheckRecord::bound("ehat_inverse", max_diff(&(&self.ehat_inv * &self.ehat), &id(m1)), tol.weak_eq),
            rec("eq_27qq", weak_equal(&(&self.ehat_inv * &self.art.d11 * &self.ehat), &self.art.d11, tol).0),
            rec(
                "eq_27q",
                weak_equal(&self.art.omega_low, &(self.ehat_inv.transpose() * &self.omega_y * &self.ehat_inv), tol).0,
            ),
            rec(
                "eq_27wp",
                weak_equal(&(&self.ehat * &self.omega_y_inv * self.ehat.transpose()), &self.art.omega_up, tol).0,
            ),
            rec("eq_29q", weak_equal(&self.c_delta, &self.c_delta_direct(&at)?, tol).0),
            rec("eq_p11", weak_equal(&(&self.c_delta * &self.c_delta_inv), &id(nd), tol).0),
            CheckRecord::count("eq_29z_rank", rank_tol(&self.c_delta, tol)?, nd),
            rec("c_delta_antisymmetry", antisymmetry_residual(&self.c_delta).max(antisymmetry_residual(&self.c_delta_inv))),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let z = random_gaussian(self.n(), 1, &mut rng).column(0).into_owned();
            let y = random_gaussian(m1, 1, &mut rng).column(0).into_owned();
            let p = ExtendedPoint::new(z.clone(), y.clone());
            let (chi, y_rec) = self.recover(&self.chi_tilde_values(&p)?);
            let chi_true = self.base.values(&PhasePoint::new(z))?;
            worst = worst.max((chi - chi_true).amax()).max((y_rec - y).amax());
        }
        out.push(rec("eq_36", worst));
        Ok(out)
    }
}

/// `[f, g]*` of the irreducible system at an on-surface extended point.
pub fn dirac_irred(
    sys: &IrreducibleSystem,
    f: &PhaseFunction,
    g: &PhaseFunction,
    at: &ExtendedPoint,
    tol: &Tolerance,
) -> Result<f64> {
    sys.ensure_on_surface(at, tol)?;
    let p = sys.fundamental_ext(at)?;
    let lift = |h: &PhaseFunction| if h.dim() == sys.n() { h.extend(sys.m1()) } else { h.clone() };
    bracket_with(&p, &lift(f), &lift(g), &at.to_phase_point())
}

/// Random quadratic function of `dim` variables.
pub fn random_quadratic<R: Rng>(dim: usize, rng: &mut R) -> PhaseFunction {
    let q = random_gaussian(dim, dim, rng);
    let b = random_gaussian(dim, 1, rng).column(0).into_owned();
    PhaseFunction::quadratic(q, b, 0.0).expect("square form")
}

/// Cross-method agreement at extended points `(z, y)`; refuses points with `y ≠ 0`.
pub fn compare_at(
    cs: &ConstraintSet,
    at: &ExtendedPoint,
    functions: &[(PhaseFunction, PhaseFunction)],
    tol: &Tolerance,
) -> Result<Vec<CheckRecord>> {
    let base = PhasePoint::new(at.z.clone());
    cs.ensure_on_surface(&base, tol)?;
    let sys = build_default(cs, &base, tol)?;
    sys.ensure_on_surface(at, tol)?;
    let n = cs.dim();
    let poisson = &cs.spec.poisson;
    let oracle = oracle_fundamental(cs, &base, tol)?;
    let noninv = sys.art.fundamental(poisson, BracketMode::Noninvertible);
    let inv = sys.art.fundamental(poisson, BracketMode::Invertible);
    let inter_ext = sys.fundamental_intermediate(at)?;
    let irred_ext = sys.fundamental_ext(at)?;
    let inter = inter_ext.view((0, 0), (n, n)).into_owned();
    let irred = irred_ext.view((0, 0), (n, n)).into_owned();
    let mut pairs = vec![
        ("eq_14q", &noninv, &oracle),
        ("eq_24", &inv, &oracle),
        ("eq_27", &inter, &oracle),
        ("eq_32y", &irred, &inter),
        ("eq_32", &irred, &oracle),
    ];
    let mut out = Vec::new();
    let scale = max_abs(&oracle);
    for (name, a, b) in pairs.drain(..) {
        let mut worst = max_diff(a, b);
        for (f, g) in functions {
            let (gf, gg) = (f.gradient(&base)?, g.gradient(&base)?);
            worst = worst.max((gf.dot(&(a * &gg)) - gf.dot(&(b * &gg))).abs());
        }
        out.push(CheckRecord::bound(name, worst, tol.weak_bound(scale)));
    }
    let ext_point = at.to_phase_point();
    let y_rows = irred_ext.rows(n, sys.m1()).into_owned();
    let mut casimir_y = max_abs(&y_rows);
    for (f, _) in functions {
        let fe = f.extend(sys.m1());
        let grad = fe.gradient(&ext_point)?;
        casimir_y = casimir_y.max((&y_rows * &grad).amax());
    }
    out.push(CheckRecord::bound("casimir_y", casimir_y, tol.weak_eq));
    let gt = sys.gradients(at)?;
    out.push(CheckRecord::bound("casimir_chi_tilde", max_abs(&(&gt * &irred_ext)), tol.weak_bound(scale)));
    let g = cs.gradients(&base)?;
    let q12 = max_abs(&(&g * &noninv)).max(max_abs(&(&g * &inv)));
    out.push(CheckRecord::bound("eq_q12", q12, tol.weak_bound(scale)));
    out.push(CheckRecord::bound("eq_11a", max_abs(&(&g * &oracle)), tol.weak_bound(scale)));
    Ok(out)
}

/// Four-way agreement of the bracket formulations over sampled surface points and random quadratic functions.
pub fn equivalence_report(
    cs: &ConstraintSet,
    n_pairs_of_functions: usize,
    n_points: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<CheckReport> {
    let mut report = CheckReport::new(cs.name.clone(), *tol);
    report.seeds.push(seed);
    let points = crate::constraints::sample_surface(cs, seed, n_points, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let functions: Vec<_> = (0..n_pairs_of_functions)
        .map(|_| (random_quadratic(cs.dim(), &mut rng), random_quadratic(cs.dim(), &mut rng)))
        .collect();
    for p in &points {
        let at = ExtendedPoint::on_base(p, cs.m1());
        report.merge_worst(compare_at(cs, &at, &functions, tol)?);
    }
    Ok(report)
}

/// Right-hand side `ż = [z, h]*` with `y` held fixed.
fn velocity(sys: &IrreducibleSystem, h: &PhaseFunction, z: &Vector, y: &Vector) -> Result<Vector> {
    let at = ExtendedPoint::new(z.clone(), y.clone());
    let p = sys.fundamental_ext(&at)?;
    let grad = h.gradient(&at.to_phase_point())?;
    Ok((p * grad).rows(0, sys.n()).into_owned())
}

fn lift_hamiltonian(sys: &IrreducibleSystem, h: &PhaseFunction) -> Result<PhaseFunction> {
    if h.dim() == sys.n() {
        Ok(h.extend(sys.m1()))
    } else if h.dim() == sys.ext_dim() {
        Ok(h.clone())
    } else {
        Err(Error::InvalidInput(format!("Hamiltonian has dimension {}", h.dim())))
    }
}

/// One classical Runge–Kutta step of the irreducible equations of motion.
pub fn eom_step(sys: &IrreducibleSystem, h: &PhaseFunction, at: &ExtendedPoint, dt: f64) -> Result<ExtendedPoint> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameters(format!("time step {dt} must be positive")));
    }
    sys.check_point(at)?;
    let h = lift_hamiltonian(sys, h)?;
    rk4(sys, &h, at, dt)
}

fn rk4(sys: &IrreducibleSystem, h: &PhaseFunction, at: &ExtendedPoint, dt: f64) -> Result<ExtendedPoint> {
    let (z, y) = (&at.z, &at.y);
    let k1 = velocity(sys, h, z, y)?;
    let k2 = velocity(sys, h, &(z + &k1 * (dt / 2.0)), y)?;
    let k3 = velocity(sys, h, &(z + &k2 * (dt / 2.0)), y)?;
    let k4 = velocity(sys, h, &(z + &k3 * dt), y)?;
    let z_next = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    Ok(ExtendedPoint::new(z_next, y.clone()))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub end: ExtendedPoint,
    /// Largest `|χ|` seen along the path.
    pub max_drift: f64,
    pub steps: usize,
}

/// Integrates `steps` RK4 steps, optionally projecting `z` back to the surface after each step.
pub fn integrate(
    sys: &IrreducibleSystem,
    h: &PhaseFunction,
    start: &ExtendedPoint,
    dt: f64,
    steps: usize,
    project: bool,
    tol: &Tolerance,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameters(format!("time step {dt} must be positive")));
    }
    sys.check_point(start)?;
    let h = lift_hamiltonian(sys, h)?;
    let mut at = start.clone();
    let mut max_drift = sys.base.values(&PhasePoint::new(at.z.clone()))?.amax();
    for _ in 0..steps {
        at = rk4(sys, &h, &at, dt)?;
        if project {
            let p = crate::constraints::project_to_surface(&sys.base, &PhasePoint::new(at.z.clone()), tol, 20)?;
            at.z = p.z;
        }
        max_drift = max_drift.max(sys.base.values(&PhasePoint::new(at.z.clone()))?.amax());
    }
    Ok(Trajectory { end: at, max_drift, steps })
}
