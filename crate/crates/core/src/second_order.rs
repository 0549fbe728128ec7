//! Second-order reducible systems: projectors, the ω̃ pair, the invertible μ pair and both bracket forms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::numerics::{
    antisymmetry_residual, canonical_symplectic, inverse_full_rank, max_abs, max_diff, pseudoinverse,
    random_antisymmetric, rank_tol, skew_solve, weak_equal, DenseMatrix, Tolerance,
};
use crate::phase::{bracket_with, dirac_matrix, PhaseFunction, PhasePoint};
use crate::report::CheckRecord;

/// Derived matrices of a second-order system at one point.
///
/// Index objects `X^{α}_{β}` are stored with `α` as row and `β` as column.
#[derive(Debug, Clone)]
pub struct SecondOrderArtifacts {
    pub c2: DenseMatrix,
    pub gradients: DenseMatrix,
    pub z1: DenseMatrix,
    pub z2: DenseMatrix,
    /// `A^{λ₂}_{α₁}` stored M₁×M₂.
    pub a12: DenseMatrix,
    /// Inverse of `D^{λ₂}_{β₂} = Z²ᵀ A`.
    pub dbar2: DenseMatrix,
    /// `Ā^{α₂}_{α₁}` stored M₂×M₁, satisfying `abar12 · Z² = I`.
    pub abar12: DenseMatrix,
    pub d11: DenseMatrix,
    /// `Ā^{α₁}_{α₀}` stored M₁×M₀, satisfying `abar01 · Z¹ ≈ d11`.
    pub abar01: DenseMatrix,
    pub d00: DenseMatrix,
    pub m2: DenseMatrix,
    pub omega_bar: DenseMatrix,
    pub omega_hat: DenseMatrix,
    pub omega_low: DenseMatrix,
    pub omega_up: DenseMatrix,
    pub mu2: DenseMatrix,
    pub mu2_inv: DenseMatrix,
    pub point: PhasePoint,
}

/// Default seeds: canonical symplectic matrices of sizes M₁ and M₂.
pub fn default_seeds(cs: &ConstraintSet) -> Result<(DenseMatrix, DenseMatrix)> {
    check_parity(cs)?;
    Ok((canonical_symplectic(cs.m1() / 2), canonical_symplectic(cs.m2() / 2)))
}

fn check_parity(cs: &ConstraintSet) -> Result<()> {
    if cs.order() != 2 {
        return Err(Error::InvalidInput("second-order pipeline needs Z2".into()));
    }
    if !cs.m1().is_multiple_of(2) || !cs.m2().is_multiple_of(2) {
        return Err(Error::InvalidParameters(format!(
            "M1 = {} and M2 = {} must both be even",
            cs.m1(),
            cs.m2()
        )));
    }
    Ok(())
}

/// Full construction with default seeds at an on-surface point.
pub fn second_order_artifacts(cs: &ConstraintSet, at: &PhasePoint, tol: &Tolerance) -> Result<SecondOrderArtifacts> {
    let (s1, s2) = default_seeds(cs)?;
    second_order_artifacts_with(cs, at, &s1, &s2, tol)
}

pub fn second_order_artifacts_with(
    cs: &ConstraintSet,
    at: &PhasePoint,
    seed_low: &DenseMatrix,
    seed2: &DenseMatrix,
    tol: &Tolerance,
) -> Result<SecondOrderArtifacts> {
    cs.ensure_on_surface(at, tol)?;
    let mut art = projectors(cs, at, tol)?;
    let (low, up) = omega_tilde_pair(&mut art, seed_low, seed2, tol)?;
    art.omega_low = low;
    art.omega_up = up;
    let (mu2, mu2_inv) = mu_pair(&art, tol)?;
    art.mu2 = mu2;
    art.mu2_inv = mu2_inv;
    Ok(art)
}

/// Construction from a prescribed `ω̃^up`; `ω̃_low` is its inverse and ω̄, ω̂ are its projections.
pub fn second_order_artifacts_with_omega(
    cs: &ConstraintSet,
    at: &PhasePoint,
    omega_up: &DenseMatrix,
    tol: &Tolerance,
) -> Result<SecondOrderArtifacts> {
    cs.ensure_on_surface(at, tol)?;
    let mut art = projectors(cs, at, tol)?;
    ensure_seed(omega_up, art.m1(), "omega_up", tol)?;
    let omega_low = inverse_full_rank(omega_up, tol, "ω̃^up")?;
    art.omega_bar = art.d11.transpose() * &omega_low * &art.d11;
    art.omega_hat = &art.d11 * omega_up * art.d11.transpose();
    art.omega_low = omega_low;
    art.omega_up = omega_up.clone();
    let (mu2, mu2_inv) = mu_pair(&art, tol)?;
    art.mu2 = mu2;
    art.mu2_inv = mu2_inv;
    Ok(art)
}

/// Projectors and `M⁽²⁾`, leaving the ω̃ and μ fields empty.
fn projectors(cs: &ConstraintSet, at: &PhasePoint, tol: &Tolerance) -> Result<SecondOrderArtifacts> {
    check_parity(cs)?;
    let (m0, m1) = (cs.m0(), cs.m1());
    let z1 = cs.z1_at(at);
    let z2 = cs.z2_at(at).expect("order checked");
    let gradients = cs.gradients(at)?;
    let c2 = &gradients * &cs.spec.poisson * gradients.transpose();
    let a12 = z2.clone();
    let dbar2 = inverse_full_rank(&(z2.transpose() * &a12), tol, "Z2ᵀA")?;
    let abar12 = &dbar2 * a12.transpose();
    let d11 = DenseMatrix::identity(m1, m1) - &z2 * &abar12;
    let abar01 = &d11 * pseudoinverse(&z1, tol)?;
    let (r, ok) = weak_equal(&(&abar01 * &z1), &d11, tol);
    if !ok {
        return Err(Error::NoSolution { residual: r });
    }
    let d00 = DenseMatrix::identity(m0, m0) - &z1 * &abar01;
    let m2 = skew_solve(&(&d00 * &c2 * d00.transpose()), &d00, tol)?;
    let empty = DenseMatrix::zeros(0, 0);
    Ok(SecondOrderArtifacts {
        c2,
        gradients,
        z1,
        z2,
        a12,
        dbar2,
        abar12,
        d11,
        abar01,
        d00,
        m2,
        omega_bar: empty.clone(),
        omega_hat: empty.clone(),
        omega_low: empty.clone(),
        omega_up: empty.clone(),
        mu2: empty.clone(),
        mu2_inv: empty,
        point: at.clone(),
    })
}

fn ensure_seed(m: &DenseMatrix, n: usize, what: &str, tol: &Tolerance) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::InvalidInput(format!("{what} must be {n}x{n}")));
    }
    if antisymmetry_residual(m) > tol.weak_bound(max_abs(m)) {
        return Err(Error::InvalidInput(format!("{what} is not antisymmetric")));
    }
    let rank = rank_tol(m, tol)?;
    if rank != n {
        return Err(Error::InvalidInput(format!("{what} is degenerate (rank {rank} of {n})")));
    }
    Ok(())
}

/// The mutually inverse pair `(ω̃_low, ω̃^up)`; also stores the intermediates ω̄ and ω̂ in `art`.
pub fn omega_tilde_pair(
    art: &mut SecondOrderArtifacts,
    seed_low: &DenseMatrix,
    seed2: &DenseMatrix,
    tol: &Tolerance,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m1, m2) = art.z2.shape();
    ensure_seed(seed_low, m1, "seed_low", tol)?;
    ensure_seed(seed2, m2, "seed2", tol)?;
    let d11 = &art.d11;
    let omega_bar = d11.transpose() * seed_low * d11;
    let sandwich = d11 * seed_low * d11;
    let rank = rank_tol(&sandwich, tol)?;
    if rank != m1 - m2 {
        return Err(Error::ReseedRequired { rank, expected: m1 - m2 });
    }
    let omega_hat = d11 * pseudoinverse(&sandwich, tol)? * d11;
    let seed2_inv = inverse_full_rank(seed2, tol, "seed2")?;
    let low = &omega_bar + art.abar12.transpose() * seed2 * &art.abar12;
    let up = &omega_hat + &art.z2 * seed2_inv * art.z2.transpose();
    art.omega_bar = omega_bar;
    art.omega_hat = omega_hat;
    Ok((low, up))
}

/// `μ⁽²⁾ = M⁽²⁾ + Z¹ ω̃^up Z¹ᵀ` and its inverse `C + Āᵀ ω̃_low Ā`, certified against each other.
pub fn mu_pair(art: &SecondOrderArtifacts, tol: &Tolerance) -> Result<(DenseMatrix, DenseMatrix)> {
    let mu2 = &art.m2 + &art.z1 * &art.omega_up * art.z1.transpose();
    let mu2_inv = &art.c2 + art.abar01.transpose() * &art.omega_low * &art.abar01;
    let n = mu2.nrows();
    let (r, _) = weak_equal(&(&mu2 * &mu2_inv), &DenseMatrix::identity(n, n), tol);
    if r > tol.weak_eq {
        return Err(Error::CheckFailed { name: "eq_21q".into(), residual: r });
    }
    Ok((mu2, mu2_inv))
}

/// Which contracting matrix the reducible bracket uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketMode {
    Noninvertible,
    Invertible,
}

impl SecondOrderArtifacts {
    pub fn m0(&self) -> usize {
        self.c2.nrows()
    }

    pub fn m1(&self) -> usize {
        self.z2.nrows()
    }

    pub fn m2(&self) -> usize {
        self.z2.ncols()
    }

    pub fn fundamental(&self, poisson: &DenseMatrix, mode: BracketMode) -> DenseMatrix {
        let m = match mode {
            BracketMode::Noninvertible => &self.m2,
            BracketMode::Invertible => &self.mu2,
        };
        dirac_matrix(poisson, &self.gradients, m)
    }

    /// Every defining identity as a residual record.
    pub fn checks(&self, cs: &ConstraintSet, tol: &Tolerance) -> Result<Vec<CheckRecord>> {
        let (m0, m1, m2) = (self.m0(), self.m1(), self.m2());
        let id = |n: usize| DenseMatrix::identity(n, n);
        let zero = |r: &DenseMatrix| max_abs(r);
        let rec = |name: &str, r: f64| CheckRecord::bound(name, r, tol.weak_eq);
        let weak = |a: &DenseMatrix, b: &DenseMatrix| weak_equal(a, b, tol).0;
        let v = cs.values(&self.point)?;
        let mut out = vec![
            rec("eq_11e", zero(&(&self.c2 * &self.z1))),
            rec("eq_a2", weak(&(&self.abar12 * &self.z2), &id(m2))),
            CheckRecord::count("eq_a6", rank_tol(&(self.z2.transpose() * &self.a12), tol)?, m2),
            rec("eq_ay_absorb", weak(&(&self.z1 * &self.d11), &self.z1)),
            rec("eq_ay", weak(&(&self.d11 * &self.d11), &self.d11)),
            rec("eq_ax", zero(&(&self.d11 * &self.z2)).max(zero(&(self.z2.transpose() * &self.d11)))),
            rec("eq_a8", zero(&(self.a12.transpose() * &self.d11))),
            rec("eq_a9", weak(&(&self.d11 * &self.abar01), &self.abar01)),
            rec("eq_1qa", weak(&(&self.abar01 * &self.z1), &self.d11)),
            rec("eq_15", weak(&(&self.d00 * &self.d00), &self.d00)),
            rec("eq_12b", zero(&(&self.d00 * &self.z1))),
            rec(
                "eq_17",
                zero(&(&self.abar01 * &self.d00))
                    .max(weak(&(&self.d00 * &self.gradients), &self.gradients))
                    .max((&self.d00 * &v - &v).amax()),
            ),
            rec("eq_12k", zero(&(self.a12.transpose() * &self.abar01))),
            CheckRecord::count("eq_12a", rank_tol(&self.d00, tol)?, m0 + m2 - m1),
            rec("eq_11c", weak(&(&self.m2 * &self.c2), &self.d00)),
            CheckRecord::bound("m2_antisymmetry", antisymmetry_residual(&self.m2), 0.0),
            rec("eq_a1", zero(&(&self.omega_bar * &self.z2))),
            rec("eq_a3", weak(&(&self.omega_hat * &self.omega_bar), &self.d11)),
            rec("eq_a18", weak(&(&self.omega_up * &self.d11 * &self.omega_low), &self.d11)),
            rec("eq_a18a", weak(&(&self.omega_up * &self.omega_low), &id(m1))),
            CheckRecord::count("omega_rank", rank_tol(&self.omega_low, tol)?.min(rank_tol(&self.omega_up, tol)?), m1),
            rec("eq_21q", weak(&(&self.mu2 * &self.mu2_inv), &id(m0))),
            CheckRecord::count("mu2_rank", rank_tol(&self.mu2, tol)?, m0),
            rec("eq_20", weak(&self.m2, &(&self.d00 * &self.mu2 * self.d00.transpose()))),
        ];
        let antisym = antisymmetry_residual(&self.mu2)
            .max(antisymmetry_residual(&self.omega_low))
            .max(antisymmetry_residual(&self.omega_up));
        out.push(rec("omega_mu_antisymmetry", antisym));
        Ok(out)
    }
}

/// Bracket invariance under `M⁽²⁾ → M⁽²⁾ + Z¹ q̂ Z¹ᵀ` and `ω̂ → ω̂ + Z² q Z²ᵀ` for `count` random antisymmetric shifts.
pub fn ambiguity_records(
    cs: &ConstraintSet,
    at: &PhasePoint,
    count: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<Vec<CheckRecord>> {
    let (s1, s2) = default_seeds(cs)?;
    let s2_inv = inverse_full_rank(&s2, tol, "seed2")?;
    let art = second_order_artifacts_with(cs, at, &s1, &s2, tol)?;
    let poisson = &cs.spec.poisson;
    let base = art.fundamental(poisson, BracketMode::Noninvertible);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut m_shift, mut omega_shift): (f64, f64) = (0.0, 0.0);
    for _ in 0..count {
        let q_hat = random_antisymmetric(art.m1(), &mut rng);
        let shifted = &art.m2 + &art.z1 * q_hat * art.z1.transpose();
        m_shift = m_shift.max(max_diff(&dirac_matrix(poisson, &art.gradients, &shifted), &base));
        let q = random_antisymmetric(art.m2(), &mut rng);
        let seed2 = crate::numerics::antisymmetrize(&inverse_full_rank(&(&s2_inv + q), tol, "shifted seed")?);
        let moved = second_order_artifacts_with(cs, at, &s1, &seed2, tol)?;
        omega_shift = omega_shift.max(max_diff(&moved.fundamental(poisson, BracketMode::Invertible), &base));
    }
    Ok(vec![CheckRecord::bound("eq_14r", m_shift, tol.weak_eq), CheckRecord::bound("eq_az", omega_shift, tol.weak_eq)])
}

/// `[f,g]*` through `M⁽²⁾` (noninvertible form) or `μ⁽²⁾` (invertible form).
pub fn dirac2(
    cs: &ConstraintSet,
    f: &PhaseFunction,
    g: &PhaseFunction,
    at: &PhasePoint,
    mode: BracketMode,
    tol: &Tolerance,
) -> Result<f64> {
    let art = second_order_artifacts(cs, at, tol)?;
    bracket_with(&art.fundamental(&cs.spec.poisson, mode), f, g, at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{sample_surface, synth_linear, toy_system};
    use crate::numerics::max_diff;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn toy_identities() {
        let cs = toy_system();
        let at = PhasePoint::from_slice(&[0.0, 0.3, 0.0, -0.8]);
        let art = second_order_artifacts(&cs, &at, &tol()).unwrap();
        for c in art.checks(&cs, &tol()).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        assert_eq!(rank_tol(&art.d00, &tol()).unwrap(), 2);
        let (b, _) = cs.affine_parts().unwrap();
        assert!(max_diff(&(&art.d00 * &b), &b) < 1e-14);
    }

    #[test]
    fn toy_fundamental_brackets() {
        let cs = toy_system();
        let at = PhasePoint::from_slice(&[0.0, 1.0, 0.0, 2.0]);
        for mode in [BracketMode::Noninvertible, BracketMode::Invertible] {
            let q = |i| PhaseFunction::coordinate(4, i);
            assert!((dirac2(&cs, &q(1), &q(3), &at, mode, &tol()).unwrap() - 1.0).abs() < 1e-12);
            assert!(dirac2(&cs, &q(0), &q(2), &at, mode, &tol()).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_identities() {
        for seed in 0..3 {
            let cs = synth_linear(10, 12, 8, 2, seed).unwrap();
            let at = sample_surface(&cs, seed, 1, &tol()).unwrap().remove(0);
            let art = second_order_artifacts(&cs, &at, &tol()).unwrap();
            for c in art.checks(&cs, &tol()).unwrap() {
                assert!(c.pass, "seed {seed}: {c:?}");
            }
            let a = art.fundamental(&cs.spec.poisson, BracketMode::Noninvertible);
            let b = art.fundamental(&cs.spec.poisson, BracketMode::Invertible);
            assert!(max_diff(&a, &b) < 1e-9);
        }
    }

    #[test]
    fn bad_seeds_rejected() {
        let cs = toy_system();
        let at = PhasePoint::origin(4);
        let (s1, _) = default_seeds(&cs).unwrap();
        let zero2 = DenseMatrix::zeros(2, 2);
        assert!(second_order_artifacts_with(&cs, &at, &s1, &zero2, &tol()).is_err());
    }

    #[test]
    fn reseed_on_degenerate_sandwich() {
        let cs = toy_system();
        let at = PhasePoint::origin(4);
        let mut art = projectors(&cs, &at, &tol()).unwrap();
        let z2 = art.z2.clone();
        let u = crate::numerics::null_basis(&z2.transpose(), &tol()).unwrap();
        let wedge = |a: DenseMatrix, b: DenseMatrix| &a * b.transpose() - &b * a.transpose();
        let seed = wedge(u.columns(0, 1).into_owned(), z2.columns(0, 1).into_owned())
            + wedge(u.columns(1, 1).into_owned(), z2.columns(1, 1).into_owned())
            + wedge(u.columns(2, 1).into_owned(), u.columns(3, 1).into_owned());
        let (_, s2) = default_seeds(&cs).unwrap();
        assert_eq!(
            omega_tilde_pair(&mut art, &seed, &s2, &tol()).unwrap_err(),
            Error::ReseedRequired { rank: 2, expected: 4 }
        );
    }
}
