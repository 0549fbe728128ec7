//! First-order reducible Dirac bracket and its irreducible lift with auxiliary variables.

use std::sync::Arc;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numerics::{
    antisymmetry_residual, block_diag, canonical_symplectic, inverse_full_rank, max_abs, max_diff, pseudoinverse,
    random_antisymmetric, rank_tol, skew_solve, weak_equal, DenseMatrix, Tolerance, Vector,
};
use crate::phase::{bracket_with, dirac_matrix, PhaseFunction, PhasePoint};
use crate::report::CheckRecord;

#[derive(Debug, Clone)]
pub struct FirstOrderArtifacts {
    /// `C_{α₀β₀}`.
    pub c1: DenseMatrix,
    /// `ā^{α₁}_{α₀}`, stored M₁×M₀ so that `abar·Z = I`.
    pub abar: DenseMatrix,
    pub d: DenseMatrix,
    pub m1: DenseMatrix,
    pub z1: DenseMatrix,
    pub gradients: DenseMatrix,
    pub point: PhasePoint,
}

/// Builds the first-order artifacts at an on-surface point.
pub fn first_order_artifacts(cs: &ConstraintSet, at: &PhasePoint, tol: &Tolerance) -> Result<FirstOrderArtifacts> {
    cs.ensure_on_surface(at, tol)?;
    build_first_order(cs, at, tol)
}

/// Same construction without the surface check, for evaluating brackets as smooth functions near the surface.
pub fn build_first_order(cs: &ConstraintSet, at: &PhasePoint, tol: &Tolerance) -> Result<FirstOrderArtifacts> {
    if cs.order() != 1 {
        return Err(Error::InvalidInput("first-order pipeline needs a system without Z2".into()));
    }
    let z1 = cs.z1_at(at);
    let rank = rank_tol(&z1, tol)?;
    if rank != cs.m1() {
        return Err(Error::Degenerate(format!("Z1 has rank {rank}, its {} columns must be independent", cs.m1())));
    }
    let gradients = cs.gradients(at)?;
    let c1 = &gradients * &cs.spec.poisson * gradients.transpose();
    let abar = pseudoinverse(&z1, tol)?;
    let d = DenseMatrix::identity(cs.m0(), cs.m0()) - &z1 * &abar;
    let m1 = skew_solve(&(&d * &c1 * &d), &d, tol)?;
    Ok(FirstOrderArtifacts { c1, abar, d, m1, z1, gradients, point: at.clone() })
}

impl FirstOrderArtifacts {
    pub fn fundamental(&self, poisson: &DenseMatrix) -> DenseMatrix {
        dirac_matrix(poisson, &self.gradients, &self.m1)
    }

    /// Residuals of the defining relations at the construction point.
    pub fn checks(&self, cs: &ConstraintSet, tol: &Tolerance) -> Result<Vec<CheckRecord>> {
        let m1 = self.abar.nrows();
        let mut out = Vec::new();
        let (r, _) = weak_equal(&(&self.abar * &self.z1), &DenseMatrix::identity(m1, m1), tol);
        out.push(CheckRecord::bound("eq_7", r, tol.weak_eq));
        let (r, _) = weak_equal(&(&self.m1 * &self.c1), &self.d, tol);
        out.push(CheckRecord::bound("eq_8", r, tol.weak_eq));
        out.push(CheckRecord::bound("m1_antisymmetry", antisymmetry_residual(&self.m1), 0.0));
        let r = max_abs(&(&self.m1 * &self.c1 * &self.z1));
        out.push(CheckRecord::bound("eq_13", r, tol.weak_eq));
        let r = max_abs(&(&self.d * &self.gradients - &self.gradients));
        let v = cs.values(&self.point)?;
        let r = r.max((&self.d * &v - &v).amax());
        out.push(CheckRecord::bound("eq_c5", r, tol.weak_eq));
        out.push(CheckRecord::count("d_rank", rank_tol(&self.d, tol)?, cs.independent_count()));
        Ok(out)
    }
}

/// Largest change of the fundamental brackets under `M⁽¹⁾ → M⁽¹⁾ + Z q Zᵀ` over `count` random antisymmetric `q`.
pub fn ambiguity_record(cs: &ConstraintSet, at: &PhasePoint, count: usize, seed: u64, tol: &Tolerance) -> Result<CheckRecord> {
    let art = first_order_artifacts(cs, at, tol)?;
    let poisson = &cs.spec.poisson;
    let base = art.fundamental(poisson);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let q = random_antisymmetric(cs.m1(), &mut rng);
        let shifted = &art.m1 + &art.z1 * q * art.z1.transpose();
        worst = worst.max(max_diff(&dirac_matrix(poisson, &art.gradients, &shifted), &base));
    }
    Ok(CheckRecord::bound("eq_10wq", worst, tol.weak_eq))
}

/// `[f,g] − [f,χ] M⁽¹⁾ [χ,g]`.
pub fn dirac1(cs: &ConstraintSet, f: &PhaseFunction, g: &PhaseFunction, at: &PhasePoint, tol: &Tolerance) -> Result<f64> {
    let art = first_order_artifacts(cs, at, tol)?;
    bracket_with(&art.fundamental(&cs.spec.poisson), f, g, at)
}

/// The first-order Dirac bracket `[f,g]*` as a phase function, rebuilt pointwise.
pub fn dirac1_function(cs: &ConstraintSet, f: &PhaseFunction, g: &PhaseFunction, tol: &Tolerance) -> PhaseFunction {
    let cs = Arc::new(cs.clone());
    let (f, g, tol) = (f.clone(), g.clone(), *tol);
    PhaseFunction::opaque(cs.dim(), move |z: &Vector| {
        let at = PhasePoint::new(z.clone());
        let art = build_first_order(&cs, &at, &tol).expect("first-order artifacts near the surface");
        bracket_with(&art.fundamental(&cs.spec.poisson), &f, &g, &at).expect("matching dimensions")
    })
}

/// Cyclic sum `[f,[g,h]*]* + [g,[h,f]*]* + [h,[f,g]*]*` at an on-surface point.
pub fn jacobi_residual(
    cs: &ConstraintSet,
    f: &PhaseFunction,
    g: &PhaseFunction,
    h: &PhaseFunction,
    at: &PhasePoint,
    tol: &Tolerance,
) -> Result<f64> {
    let outer = first_order_artifacts(cs, at, tol)?.fundamental(&cs.spec.poisson);
    let term = |a: &PhaseFunction, b: &PhaseFunction, c: &PhaseFunction| -> Result<f64> {
        bracket_with(&outer, a, &dirac1_function(cs, b, c, tol), at)
    };
    Ok(term(f, g, h)? + term(g, h, f)? + term(h, f, g)?)
}

/// Irreducible lift `χ̄ = χ + a·Y` on the space `(z, Y)` with `[Y, Y] = Γ`.
#[derive(Debug, Clone)]
pub struct FirstOrderLift {
    pub gamma: DenseMatrix,
    /// `a^{α₁}_{α₀}`, M₀×M₁.
    pub a_lift: DenseMatrix,
    /// Inverse of `D^{λ₁}_{β₁} = (aᵀ Z)`.
    pub dbar: DenseMatrix,
    pub chi_bar: Vec<PhaseFunction>,
    pub mu1: DenseMatrix,
    /// `blockdiag(J, Γ)`.
    pub poisson_ext: DenseMatrix,
    pub base: FirstOrderArtifacts,
}

/// Default lift data: canonical `Γ` and `a = Z¹`.
pub fn default_lift_data(cs: &ConstraintSet, at: &PhasePoint) -> Result<(DenseMatrix, DenseMatrix)> {
    if !cs.m1().is_multiple_of(2) {
        return Err(Error::InvalidParameters(format!(
            "the lift needs an invertible antisymmetric Γ, impossible for odd M1 = {}",
            cs.m1()
        )));
    }
    Ok((canonical_symplectic(cs.m1() / 2), cs.z1_at(at)))
}

pub fn irreducible_lift_1(
    cs: &ConstraintSet,
    gamma: &DenseMatrix,
    a_lift: &DenseMatrix,
    at: &PhasePoint,
    tol: &Tolerance,
) -> Result<FirstOrderLift> {
    let m1 = cs.m1();
    if gamma.shape() != (m1, m1) || a_lift.shape() != (cs.m0(), m1) {
        return Err(Error::InvalidInput("Γ must be M1xM1 and a must be M0xM1".into()));
    }
    if antisymmetry_residual(gamma) > tol.weak_bound(max_abs(gamma)) {
        return Err(Error::InvalidInput("Γ is not antisymmetric".into()));
    }
    let gamma_inv = inverse_full_rank(gamma, tol, "Γ")?;
    let base = first_order_artifacts(cs, at, tol)?;
    let d_small = a_lift.transpose() * &base.z1;
    let dbar = inverse_full_rank(&d_small, tol, "aᵀZ").map_err(|e| Error::InvalidInput(format!("invalid a: {e}")))?;
    let zd = &base.z1 * &dbar;
    let mu1 = &base.m1 + &zd * &gamma_inv * zd.transpose();
    let chi_bar = cs
        .chi
        .iter()
        .enumerate()
        .map(|(i, f)| f.extend_with_linear(&a_lift.row(i).transpose()))
        .collect();
    Ok(FirstOrderLift {
        gamma: gamma.clone(),
        a_lift: a_lift.clone(),
        dbar,
        chi_bar,
        mu1,
        poisson_ext: block_diag(&cs.spec.poisson, gamma),
        base,
    })
}

impl FirstOrderLift {
    pub fn m1(&self) -> usize {
        self.gamma.nrows()
    }

    /// Gradients of `χ̄` at the extended point `(z, Y)`.
    pub fn gradients(&self, at: &PhasePoint) -> Result<DenseMatrix> {
        let mut g = DenseMatrix::zeros(self.chi_bar.len(), at.dim());
        for (i, f) in self.chi_bar.iter().enumerate() {
            g.set_row(i, &f.gradient(at)?.transpose());
        }
        Ok(g)
    }

    /// Fundamental bracket matrix of the lifted bracket on `(z, Y)`.
    pub fn fundamental(&self, at: &PhasePoint) -> Result<DenseMatrix> {
        Ok(dirac_matrix(&self.poisson_ext, &self.gradients(at)?, &self.mu1))
    }

    /// The extended point `(z, 0)` over a base point.
    pub fn extend_point(&self, at: &PhasePoint) -> PhasePoint {
        let n = at.dim();
        PhasePoint::new(Vector::from_fn(n + self.m1(), |i, _| if i < n { at.z[i] } else { 0.0 }))
    }

    pub fn lifted_bracket(&self, f: &PhaseFunction, g: &PhaseFunction, at: &PhasePoint) -> Result<f64> {
        bracket_with(&self.fundamental(at)?, f, g, at)
    }

    pub fn checks(&self, tol: &Tolerance) -> Result<Vec<CheckRecord>> {
        let n = self.mu1.nrows();
        let at = self.extend_point(&self.base.point);
        let g = self.gradients(&at)?;
        let c_bar = &g * &self.poisson_ext * g.transpose();
        let (r, _) = weak_equal(&(&self.mu1 * &c_bar), &DenseMatrix::identity(n, n), tol);
        Ok(vec![
            CheckRecord::count("eq_12_rank", rank_tol(&self.dbar, tol)?, self.m1()),
            CheckRecord::count("mu1_rank", rank_tol(&self.mu1, tol)?, n),
            CheckRecord::bound("mu1_inverse", r, tol.weak_eq),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{curved_first_order, duplicated_pair, sample_surface};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn coord(i: usize) -> PhaseFunction {
        PhaseFunction::coordinate(4, i)
    }

    #[test]
    fn duplicated_pair_brackets() {
        let cs = duplicated_pair();
        let at = PhasePoint::from_slice(&[0.0, 0.4, 0.0, -1.1]);
        let art = first_order_artifacts(&cs, &at, &tol()).unwrap();
        assert_eq!(rank_tol(&art.d, &tol()).unwrap(), 2);
        for c in art.checks(&cs, &tol()).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        assert!((dirac1(&cs, &coord(1), &coord(3), &at, &tol()).unwrap() - 1.0).abs() < 1e-12);
        assert!(dirac1(&cs, &coord(0), &coord(2), &at, &tol()).unwrap().abs() < 1e-12);
        for chi in &cs.chi {
            assert!(dirac1(&cs, chi, &coord(3), &at, &tol()).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn odd_lift_refused() {
        let cs = duplicated_pair();
        assert!(default_lift_data(&cs, &PhasePoint::origin(4)).is_err());
    }

    #[test]
    fn lift_matches_on_curved_system() {
        let cs = curved_first_order();
        let pts = sample_surface(&cs, 4, 5, &tol()).unwrap();
        for at in &pts {
            let (gamma, a) = default_lift_data(&cs, at).unwrap();
            let lift = irreducible_lift_1(&cs, &gamma, &a, at, &tol()).unwrap();
            for c in lift.checks(&tol()).unwrap() {
                assert!(c.pass, "{c:?}");
            }
            let ext = lift.extend_point(at);
            let p = lift.fundamental(&ext).unwrap();
            let base = first_order_artifacts(&cs, at, &tol()).unwrap().fundamental(&cs.spec.poisson);
            let zblock = p.view((0, 0), (4, 4)).into_owned();
            assert!(crate::numerics::max_diff(&zblock, &base) < 1e-9);
            let y_rows = p.view((4, 0), (2, 6)).into_owned();
            assert!(max_abs(&y_rows) < 1e-9);
        }
    }

    #[test]
    fn jacobi_on_curved_system() {
        let cs = curved_first_order();
        let q = |a: f64, b: f64| {
            PhaseFunction::quadratic(
                DenseMatrix::from_fn(4, 4, |i, j| a * (i as f64 + 1.0) * (j as f64 + 1.0) + if i == j { b } else { 0.0 }),
                Vector::from_fn(4, |i, _| (i as f64) - b),
                0.0,
            )
            .unwrap()
        };
        let (f, g, h) = (q(0.3, 1.0), q(-0.2, 0.5), q(0.1, -0.7));
        let at = sample_surface(&cs, 2, 1, &tol()).unwrap().remove(0);
        let r = jacobi_residual(&cs, &f, &g, &h, &at, &tol()).unwrap();
        assert!(r.abs() < 1e-4, "jacobi residual {r}");
    }
}
