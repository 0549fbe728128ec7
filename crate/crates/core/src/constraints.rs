//! Constraint sets with reducibility data, validation, surface sampling and generators.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    block_diag, canonical_symplectic, max_abs, null_basis, pseudoinverse, random_gaussian, rank_tol, DenseMatrix,
    Tolerance, Vector,
};
use crate::phase::{PhaseFunction, PhasePoint, PhaseSpec};
use crate::report::{CheckRecord, CheckReport};

type MatrixField = Arc<dyn Fn(&Vector) -> DenseMatrix + Send + Sync>;

/// A reducibility matrix, constant or varying over phase space.
#[derive(Clone)]
pub enum Reducibility {
    Constant(DenseMatrix),
    PointDependent { rows: usize, cols: usize, field: MatrixField },
}

impl fmt::Debug for Reducibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reducibility::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Reducibility::PointDependent { rows, cols, .. } => {
                f.debug_struct("PointDependent").field("rows", rows).field("cols", cols).finish()
            }
        }
    }
}

impl Reducibility {
    pub fn point_dependent(
        rows: usize,
        cols: usize,
        field: impl Fn(&Vector) -> DenseMatrix + Send + Sync + 'static,
    ) -> Self {
        Reducibility::PointDependent { rows, cols, field: Arc::new(field) }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Reducibility::Constant(m) => m.shape(),
            Reducibility::PointDependent { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn at(&self, p: &PhasePoint) -> DenseMatrix {
        match self {
            Reducibility::Constant(m) => m.clone(),
            Reducibility::PointDependent { field, .. } => field(&p.z),
        }
    }

    pub fn constant(&self) -> Option<&DenseMatrix> {
        match self {
            Reducibility::Constant(m) => Some(m),
            Reducibility::PointDependent { .. } => None,
        }
    }
}

/// Constraints `χ_{α₀}` with first-order reducibility `Z¹` and optional second-order `Z²`.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub name: String,
    pub spec: PhaseSpec,
    pub chi: Vec<PhaseFunction>,
    /// `Z^{α₀}_{α₁}`, M₀×M₁.
    pub z1: Reducibility,
    /// `Z^{α₁}_{α₂}`, M₁×M₂.
    pub z2: Option<Reducibility>,
}

impl ConstraintSet {
    pub fn new(
        name: impl Into<String>,
        spec: PhaseSpec,
        chi: Vec<PhaseFunction>,
        z1: Reducibility,
        z2: Option<Reducibility>,
    ) -> Result<Self> {
        let dim = spec.dim();
        if let Some(i) = chi.iter().position(|f| f.dim() != dim) {
            return Err(Error::InvalidInput(format!("constraint {i} is not defined on dimension {dim}")));
        }
        let (r1, m1) = z1.shape();
        if r1 != chi.len() {
            return Err(Error::InvalidInput(format!("Z1 has {r1} rows but there are {} constraints", chi.len())));
        }
        if let Some(z2) = &z2 {
            let (r2, _) = z2.shape();
            if r2 != m1 {
                return Err(Error::InvalidInput(format!("Z2 has {r2} rows but Z1 has {m1} columns")));
            }
        }
        Ok(ConstraintSet { name: name.into(), spec, chi, z1, z2 })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn m0(&self) -> usize {
        self.chi.len()
    }

    pub fn m1(&self) -> usize {
        self.z1.shape().1
    }

    pub fn m2(&self) -> usize {
        self.z2.as_ref().map_or(0, |z| z.shape().1)
    }

    pub fn order(&self) -> usize {
        if self.z2.is_some() {
            2
        } else {
            1
        }
    }

    /// Number of independent constraints, `M₀ − M₁ + M₂` (or `M₀ − M₁` at first order).
    pub fn independent_count(&self) -> usize {
        self.m0() + self.m2() - self.m1()
    }

    pub fn z1_at(&self, p: &PhasePoint) -> DenseMatrix {
        self.z1.at(p)
    }

    pub fn z2_at(&self, p: &PhasePoint) -> Option<DenseMatrix> {
        self.z2.as_ref().map(|z| z.at(p))
    }

    pub fn values(&self, p: &PhasePoint) -> Result<Vector> {
        let v: Result<Vec<f64>> = self.chi.iter().map(|f| f.eval(p)).collect();
        Ok(Vector::from_vec(v?))
    }

    /// Gradient matrix with row `α₀` equal to `∇χ_{α₀}`.
    pub fn gradients(&self, p: &PhasePoint) -> Result<DenseMatrix> {
        let mut g = DenseMatrix::zeros(self.m0(), self.dim());
        for (i, f) in self.chi.iter().enumerate() {
            g.set_row(i, &f.gradient(p)?.transpose());
        }
        Ok(g)
    }

    /// Constraint bracket matrix `C_{α₀β₀} = [χ_{α₀}, χ_{β₀}]`.
    pub fn c_matrix(&self, p: &PhasePoint) -> Result<DenseMatrix> {
        let g = self.gradients(p)?;
        Ok(&g * &self.spec.poisson * g.transpose())
    }

    /// `(B, c)` with `χ = Bz + c` when every constraint is affine.
    pub fn affine_parts(&self) -> Option<(DenseMatrix, Vector)> {
        let mut b = DenseMatrix::zeros(self.m0(), self.dim());
        let mut c = Vector::zeros(self.m0());
        for (i, f) in self.chi.iter().enumerate() {
            match f {
                PhaseFunction::Affine { b: row, c: ci } => {
                    b.set_row(i, &row.transpose());
                    c[i] = *ci;
                }
                _ => return None,
            }
        }
        Some((b, c))
    }

    pub fn max_violation(&self, p: &PhasePoint) -> Result<(usize, f64)> {
        let v = self.values(p)?;
        Ok(v.iter()
            .enumerate()
            .map(|(i, x)| (i, x.abs()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc }))
    }

    pub fn ensure_on_surface(&self, p: &PhasePoint, tol: &Tolerance) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, system has {}",
                p.dim(),
                self.dim()
            )));
        }
        let (index, residual) = self.max_violation(p)?;
        if residual > tol.surface {
            return Err(Error::OffSurface { index, residual });
        }
        Ok(())
    }

    /// A copy with one entry of `Z²` shifted, used to exercise failure paths.
    pub fn with_corrupted_z2(&self, row: usize, col: usize, delta: f64) -> Result<Self> {
        let z2 = self
            .z2
            .as_ref()
            .and_then(|z| z.constant())
            .ok_or_else(|| Error::InvalidInput("corruption needs a constant Z2".into()))?;
        let mut z2 = z2.clone();
        z2[(row, col)] += delta;
        let mut out = self.clone();
        out.z2 = Some(Reducibility::Constant(z2));
        Ok(out)
    }
}

/// Checks reducibility relations and rank counts at the given surface points.
pub fn validate(cs: &ConstraintSet, points: &[PhasePoint], tol: &Tolerance) -> Result<CheckReport> {
    let mut report = CheckReport::new(cs.name.clone(), *tol);
    for p in points {
        cs.ensure_on_surface(p, tol)?;
    }
    if let Some((b, c)) = cs.affine_parts() {
        if let Some(z1) = cs.z1.constant() {
            let scale = max_abs(z1) * max_abs(&b).max(c.amax()) * cs.m0() as f64;
            let r = max_abs(&(z1.transpose() * &b)).max((z1.transpose() * &c).amax());
            report.push(CheckRecord::bound("eq_2", r, tol.weak_bound(scale)));
        }
    }
    for p in points {
        let mut recs = Vec::new();
        let g = cs.gradients(p)?;
        let z1 = cs.z1_at(p);
        let v = cs.values(p)?;
        let scale = max_abs(&z1) * max_abs(&g) * cs.m0() as f64;
        let r = max_abs(&(z1.transpose() * &g)).max((z1.transpose() * &v).amax());
        recs.push(CheckRecord::bound("eq_2", r, tol.weak_bound(scale)));
        let rank_z1 = rank_tol(&z1, tol)?;
        recs.push(CheckRecord::count("z1_rank", rank_z1, cs.m1() - cs.m2()));
        if let Some(z2) = cs.z2_at(p) {
            let r = max_abs(&(&z1 * &z2));
            let scale = max_abs(&z1) * max_abs(&z2) * cs.m1() as f64;
            recs.push(CheckRecord::bound("eq_11x", r, tol.weak_bound(scale)));
            recs.push(CheckRecord::count("z2_rank", rank_tol(&z2, tol)?, cs.m2()));
            let odd = (cs.m1() % 2) + (cs.m2() % 2);
            recs.push(CheckRecord::count("parity_m1_m2", odd, 0));
        }
        let rank_c = rank_tol(&cs.c_matrix(p)?, tol)?;
        let tag = if cs.order() == 2 { "eq_11d_rank" } else { "eq_5_rank" };
        recs.push(CheckRecord::count(tag, rank_c, cs.independent_count()));
        report.merge_worst(recs);
    }
    Ok(report)
}

/// Gauss–Newton projection onto `χ = 0`; a single exact least-squares step for affine systems.
pub fn project_to_surface(cs: &ConstraintSet, start: &PhasePoint, tol: &Tolerance, max_iter: usize) -> Result<PhasePoint> {
    let mut p = start.clone();
    let mut residual = cs.values(&p)?.amax();
    for _ in 0..max_iter {
        if residual <= tol.surface {
            return Ok(p);
        }
        let g = cs.gradients(&p)?;
        let step = pseudoinverse(&g, tol)? * cs.values(&p)?;
        p.z -= step;
        residual = cs.values(&p)?.amax();
    }
    if residual <= tol.surface {
        Ok(p)
    } else {
        Err(Error::NonConvergence { residual })
    }
}

/// Deterministic surface points from projected standard Gaussian draws.
pub fn sample_surface(cs: &ConstraintSet, seed: u64, count: usize, tol: &Tolerance) -> Result<Vec<PhasePoint>> {
    if count == 0 {
        return Err(Error::InvalidParameters("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z = Vector::from_fn(cs.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
            project_to_surface(cs, &PhasePoint::new(z), tol, 50)
        })
        .collect()
}

/// Random affine second-order reducible second-class system `χ = Bz`.
pub fn synth_linear(n_pairs: usize, m0: usize, m1: usize, m2: usize, seed: u64) -> Result<ConstraintSet> {
    let independent = (m0 + m2).checked_sub(m1);
    let bad = |msg: String| Err(Error::InvalidParameters(msg));
    if !(m2 <= m1 && m1 <= m0) {
        return bad(format!("need m2 <= m1 <= m0, got ({m0}, {m1}, {m2})"));
    }
    if m1 == 0 || !m1.is_multiple_of(2) || !m2.is_multiple_of(2) {
        return bad(format!("m1 and m2 must be even with m1 > 0, got m1 = {m1}, m2 = {m2}"));
    }
    let r = match independent {
        Some(r) if r > 0 && r % 2 == 0 && r <= 2 * n_pairs => r,
        _ => return bad(format!("m0 - m1 + m2 must be positive, even and at most {}", 2 * n_pairs)),
    };
    let tol = Tolerance::default();
    let spec = PhaseSpec::canonical(n_pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let z2 = random_gaussian(m1, m2, &mut rng);
        if rank_tol(&z2, &tol)? != m2 {
            continue;
        }
        let s = null_basis(&z2.transpose(), &tol)?;
        let n = random_gaussian(m0, m1 - m2, &mut rng);
        let z1 = &n * s.transpose();
        if rank_tol(&z1, &tol)? != m1 - m2 {
            continue;
        }
        let u = null_basis(&z1.transpose(), &tol)?;
        if u.ncols() != r {
            continue;
        }
        let rr = random_gaussian(r, 2 * n_pairs, &mut rng);
        let b = &u * rr;
        if rank_tol(&(&b * &spec.poisson * b.transpose()), &tol)? != r {
            continue;
        }
        let chi = (0..m0).map(|i| PhaseFunction::affine(b.row(i).transpose(), 0.0)).collect();
        let z2 = (m2 > 0).then_some(Reducibility::Constant(z2));
        return ConstraintSet::new(
            format!("synth(n={n_pairs},m0={m0},m1={m1},m2={m2},seed={seed})"),
            spec,
            chi,
            Reducibility::Constant(z1),
            z2,
        );
    }
    Err(Error::Degenerate("could not draw a second-class system in 100 attempts".into()))
}

/// Two canonical pairs with `χ = (q₁, q₁, q₁, p₁, p₁, p₁)`.
pub fn toy_system() -> ConstraintSet {
    let spec = PhaseSpec::canonical(2);
    let q1 = PhaseFunction::coordinate(4, 0);
    let p1 = PhaseFunction::coordinate(4, 2);
    let chi = vec![q1.clone(), q1.clone(), q1, p1.clone(), p1.clone(), p1];
    let k = DenseMatrix::from_column_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.0, -1.0]);
    let v = DenseMatrix::from_column_slice(3, 1, &[1.0, 1.0, -1.0]);
    ConstraintSet::new(
        "toy",
        spec,
        chi,
        Reducibility::Constant(block_diag(&k, &k)),
        Some(Reducibility::Constant(block_diag(&v, &v))),
    )
    .expect("toy system is well formed")
}

/// First-order system `χ = (q₁, p₁, q₁)` on two pairs with `Z = (1, 0, −1)ᵀ`.
pub fn duplicated_pair() -> ConstraintSet {
    let q1 = PhaseFunction::coordinate(4, 0);
    let p1 = PhaseFunction::coordinate(4, 2);
    let z = DenseMatrix::from_column_slice(3, 1, &[1.0, 0.0, -1.0]);
    ConstraintSet::new("duplicated-pair", PhaseSpec::canonical(2), vec![q1.clone(), p1, q1], Reducibility::Constant(z), None)
        .expect("duplicated pair is well formed")
}

/// Curved first-order system `χ = (q₁, q₁e^{q₂}, p₁, p₁e^{q₂})` with point-dependent `Z`.
pub fn curved_first_order() -> ConstraintSet {
    let dim = 4;
    let q1 = PhaseFunction::coordinate(dim, 0);
    let p1 = PhaseFunction::coordinate(dim, 2);
    let scaled = |i: usize| {
        PhaseFunction::opaque_with_gradient(
            dim,
            move |z: &Vector| z[i] * z[1].exp(),
            move |z: &Vector| {
                let mut g = Vector::zeros(dim);
                g[i] = z[1].exp();
                g[1] = z[i] * z[1].exp();
                g
            },
        )
    };
    let z1 = Reducibility::point_dependent(4, 2, |z: &Vector| {
        let e = z[1].exp();
        DenseMatrix::from_column_slice(4, 2, &[e, -1.0, 0.0, 0.0, 0.0, 0.0, e, -1.0])
    });
    ConstraintSet::new("curved", PhaseSpec::canonical(2), vec![q1, scaled(0), p1, scaled(2)], z1, None)
        .expect("curved system is well formed")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSpec {
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

/// On-disk description of an affine system with constant reducibility matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson: Option<Vec<Vec<f64>>>,
    pub chi: ChiSpec,
    #[serde(rename = "Z1")]
    pub z1: Vec<Vec<f64>>,
    #[serde(rename = "Z2", default, skip_serializing_if = "Option::is_none")]
    pub z2: Option<Vec<Vec<f64>>>,
}

fn rows_to_matrix(field: &str, rows: &[Vec<f64>], nrows: usize, ncols: Option<usize>) -> Result<DenseMatrix> {
    if rows.len() != nrows {
        return Err(Error::InvalidInput(format!("field `{field}`: expected {nrows} rows, found {}", rows.len())));
    }
    let ncols = ncols.unwrap_or_else(|| rows.first().map_or(0, |r| r.len()));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::InvalidInput(format!(
                "field `{field}`: row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        if let Some(j) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("field `{field}`: entry ({i}, {j}) is not finite")));
        }
    }
    Ok(DenseMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed system file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }

    pub fn to_constraint_set(&self, name: &str, tol: &Tolerance) -> Result<ConstraintSet> {
        let dim = 2 * self.n_pairs;
        if self.n_pairs == 0 {
            return Err(Error::InvalidInput("field `n_pairs`: must be positive".into()));
        }
        let spec = match &self.poisson {
            Some(rows) => PhaseSpec::with_poisson(self.n_pairs, rows_to_matrix("poisson", rows, dim, Some(dim))?, tol)?,
            None => PhaseSpec::canonical(self.n_pairs),
        };
        let m0 = self.chi.b.len();
        let b = rows_to_matrix("chi.B", &self.chi.b, m0, Some(dim))?;
        if self.chi.c.len() != m0 {
            return Err(Error::InvalidInput(format!(
                "field `chi.c`: expected {m0} entries, found {}",
                self.chi.c.len()
            )));
        }
        let z1 = rows_to_matrix("Z1", &self.z1, m0, None)?;
        let z2 = match &self.z2 {
            Some(rows) => Some(rows_to_matrix("Z2", rows, z1.ncols(), None)?),
            None => None,
        };
        let chi = (0..m0).map(|i| PhaseFunction::affine(b.row(i).transpose(), self.chi.c[i])).collect();
        ConstraintSet::new(name, spec, chi, Reducibility::Constant(z1), z2.map(Reducibility::Constant))
    }

    pub fn from_constraint_set(cs: &ConstraintSet) -> Result<Self> {
        let (b, c) = cs
            .affine_parts()
            .ok_or_else(|| Error::InvalidInput("only affine systems can be written to a file".into()))?;
        let z1 = cs.z1.constant().ok_or_else(|| Error::InvalidInput("Z1 must be constant".into()))?;
        let z2 = match &cs.z2 {
            Some(z) => Some(matrix_to_rows(z.constant().ok_or_else(|| Error::InvalidInput("Z2 must be constant".into()))?)),
            None => None,
        };
        let canonical = cs.spec.poisson == canonical_symplectic(cs.spec.n_pairs);
        Ok(SystemFile {
            n_pairs: cs.spec.n_pairs,
            poisson: (!canonical).then(|| matrix_to_rows(&cs.spec.poisson)),
            chi: ChiSpec { b: matrix_to_rows(&b), c: c.iter().copied().collect() },
            z1: matrix_to_rows(z1),
            z2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn toy_structure() {
        let cs = toy_system();
        assert_eq!((cs.m0(), cs.m1(), cs.m2(), cs.order()), (6, 6, 2, 2));
        assert_eq!(cs.independent_count(), 2);
        let z1 = cs.z1.constant().unwrap();
        let z2 = cs.z2.as_ref().unwrap().constant().unwrap();
        assert_eq!(max_abs(&(z1 * z2)), 0.0);
        let (b, _) = cs.affine_parts().unwrap();
        assert_eq!(max_abs(&(z1.transpose() * b)), 0.0);
    }

    #[test]
    fn toy_validates() {
        let cs = toy_system();
        let pts = sample_surface(&cs, 1, 20, &tol()).unwrap();
        for p in &pts {
            assert!(p.z[0].abs() < 1e-12 && p.z[2].abs() < 1e-12);
        }
        let rep = validate(&cs, &pts, &tol()).unwrap();
        assert!(rep.pass(), "{}", rep.to_table());
        assert_eq!(rep.get("eq_11d_rank").unwrap().residual, 0.0);
    }

    #[test]
    fn corrupted_z2_fails() {
        let cs = toy_system().with_corrupted_z2(0, 0, 1.0).unwrap();
        let pts = sample_surface(&cs, 1, 3, &tol()).unwrap();
        let rep = validate(&cs, &pts, &tol()).unwrap();
        assert!(!rep.get("eq_11x").unwrap().pass);
    }

    #[test]
    fn off_surface_refused() {
        let cs = toy_system();
        let p = PhasePoint::from_slice(&[0.5, 0.0, 0.0, 0.0]);
        assert!(matches!(validate(&cs, &[p], &tol()), Err(Error::OffSurface { .. })));
    }

    #[test]
    fn projection_examples() {
        let cs = duplicated_pair();
        let p = project_to_surface(&cs, &PhasePoint::from_slice(&[0.7, 0.3, 0.0, -0.2]), &tol(), 5).unwrap();
        assert!(p.z[0].abs() < 1e-14);
        assert_eq!(p.z[1], 0.3);
        assert_eq!(p.z[3], -0.2);
        let again = project_to_surface(&cs, &p, &tol(), 5).unwrap();
        assert_eq!(again, p);
        let curved = curved_first_order();
        let p = project_to_surface(&curved, &PhasePoint::from_slice(&[0.4, 0.8, -0.3, 0.1]), &tol(), 20).unwrap();
        assert!(curved.values(&p).unwrap().amax() < 1e-10);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cs = synth_linear(10, 12, 8, 2, 5).unwrap();
        let a = sample_surface(&cs, 9, 3, &tol()).unwrap();
        let b = sample_surface(&cs, 9, 3, &tol()).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(cs.values(p).unwrap().amax() < 1e-10);
        }
    }

    #[test]
    fn synth_examples() {
        let cs = synth_linear(10, 12, 8, 2, 7).unwrap();
        let pts = sample_surface(&cs, 3, 20, &tol()).unwrap();
        let rep = validate(&cs, &pts, &tol()).unwrap();
        assert!(rep.pass(), "{}", rep.to_table());
        assert_eq!(rank_tol(&cs.c_matrix(&pts[0]).unwrap(), &tol()).unwrap(), 6);
        assert!(synth_linear(10, 4, 3, 1, 0).is_err());
        let again = synth_linear(10, 12, 8, 2, 7).unwrap();
        assert_eq!(cs.affine_parts().unwrap().0, again.affine_parts().unwrap().0);
        assert_eq!(cs.z1.constant(), again.z1.constant());
    }

    #[test]
    fn file_round_trip() {
        let cs = toy_system();
        let f = SystemFile::from_constraint_set(&cs).unwrap();
        let text = f.to_json();
        let back = SystemFile::parse(&text).unwrap();
        assert_eq!(back, f);
        let cs2 = back.to_constraint_set("toy", &tol()).unwrap();
        assert_eq!(cs2.affine_parts().unwrap().0, cs.affine_parts().unwrap().0);
        assert!(text.contains("\"Z2\""));
    }

    #[test]
    fn file_diagnostics() {
        let err = SystemFile::parse("{\"n_pairs\": 1,").unwrap_err();
        assert!(err.to_string().contains("line"));
        let mut f = SystemFile::from_constraint_set(&toy_system()).unwrap();
        f.z1[2].pop();
        let err = f.to_constraint_set("bad", &tol()).unwrap_err();
        assert!(err.to_string().contains("Z1"));
    }
}
