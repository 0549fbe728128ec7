//! Free three-form gauge field on a periodic lattice.
//!
//! Fields live on the zero-mean subspace of the `L^d` sites, so the lattice Laplacian is invertible.
//! Antisymmetric index groups are stored once per sorted tuple.

use std::time::Instant;

use crate::constraints::{validate, ConstraintSet, Reducibility};
use crate::error::{Error, Result};
use crate::irreducible::{build_irreducible, EhatChoice, ExtendedPoint, IrreducibleSystem};
use crate::numerics::{
    block_diag, inverse_full_rank, max_abs, max_diff, null_basis, singular_values, weak_equal, DenseMatrix, Tolerance, Vector,
};
use crate::oracle::oracle_fundamental;
use crate::phase::{PhaseFunction, PhasePoint, PhaseSpec};
use crate::report::{CheckRecord, CheckReport};
use crate::second_order::{second_order_artifacts, second_order_artifacts_with_omega, BracketMode, SecondOrderArtifacts};

/// Lattice realization of the partial derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    /// `f(x + e_i) - f(x)`; its adjoint is minus the backward difference.
    ForwardDifference,
    /// Exact derivative of the trigonometric interpolant. Needs odd `L`.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    pub d: usize,
    pub l: usize,
    pub derivative: Derivative,
}

impl LatticeSpec {
    pub fn new(d: usize, l: usize, derivative: Derivative) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidParameters(format!("a three-form needs d >= 3, got d = {d}")));
        }
        if l < 3 {
            return Err(Error::InvalidParameters(format!("lattice extent must be at least 3, got L = {l}")));
        }
        if derivative == Derivative::Spectral && l.is_multiple_of(2) {
            return Err(Error::InvalidParameters(format!(
                "the spectral derivative vanishes on the Nyquist mode; use odd L (got {l})"
            )));
        }
        Ok(LatticeSpec { d, l, derivative })
    }

    pub fn sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Field components per antisymmetric index tuple after removing the constant mode.
    pub fn modes(&self) -> usize {
        self.sites() - 1
    }
}

/// Index bookkeeping for one lattice.
#[derive(Debug, Clone)]
pub struct ModeMap {
    pub triples: Vec<[usize; 3]>,
    pub pairs: Vec<[usize; 2]>,
    pub modes: usize,
}

impl ModeMap {
    fn new(d: usize, modes: usize) -> Self {
        let mut triples = Vec::new();
        let mut pairs = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                pairs.push([i, j]);
                for k in (j + 1)..d {
                    triples.push([i, j, k]);
                }
            }
        }
        ModeMap { triples, pairs, modes }
    }

    pub fn triple_index(&self, t: [usize; 3]) -> Option<usize> {
        self.triples.iter().position(|&x| x == t)
    }
}

#[derive(Debug, Clone)]
pub struct ThreeFormSystem {
    pub lattice: LatticeSpec,
    pub cs: ConstraintSet,
    pub mode_map: ModeMap,
    /// Orthonormal basis of zero-mean site fields, `L^d × (L^d - 1)`.
    pub basis: DenseMatrix,
    /// Reduced derivative matrices `D_i`.
    pub derivatives: Vec<DenseMatrix>,
    /// `Σ D_iᵀ D_i`, positive definite on zero-mean fields.
    pub laplacian: DenseMatrix,
    pub laplacian_inv: DenseMatrix,
    /// Divergence of a three-form, two-forms × three-forms.
    pub divergence: DenseMatrix,
}

fn site_coords(x: usize, spec: &LatticeSpec) -> Vec<usize> {
    let mut c = Vec::with_capacity(spec.d);
    let mut r = x;
    for _ in 0..spec.d {
        c.push(r % spec.l);
        r /= spec.l;
    }
    c
}

fn site_index(c: &[usize], l: usize) -> usize {
    c.iter().rev().fold(0, |acc, &ci| acc * l + ci)
}

/// Site-basis derivative along `axis`.
pub fn site_derivative(spec: &LatticeSpec, axis: usize) -> DenseMatrix {
    let v = spec.sites();
    let l = spec.l;
    let mut m = DenseMatrix::zeros(v, v);
    let kernel: Vec<f64> = match spec.derivative {
        Derivative::ForwardDifference => Vec::new(),
        Derivative::Spectral => (0..l)
            .map(|n| {
                let half = (l - 1) / 2;
                let tau = std::f64::consts::TAU;
                -(2.0 / l as f64)
                    * (1..=half)
                        .map(|k| {
                            let kappa = tau * k as f64 / l as f64;
                            kappa * (kappa * n as f64).sin()
                        })
                        .sum::<f64>()
            })
            .collect(),
    };
    for x in 0..v {
        let c = site_coords(x, spec);
        match spec.derivative {
            Derivative::ForwardDifference => {
                let mut up = c.clone();
                up[axis] = (up[axis] + 1) % l;
                m[(x, site_index(&up, l))] += 1.0;
                m[(x, x)] -= 1.0;
            }
            Derivative::Spectral => {
                for s in 0..l {
                    let mut other = c.clone();
                    other[axis] = s;
                    let n = (c[axis] + l - s) % l;
                    m[(x, site_index(&other, l))] += kernel[n];
                }
            }
        }
    }
    m
}

fn perm_sign(seq: &[usize]) -> f64 {
    let mut s = 1.0;
    for i in 0..seq.len() {
        for j in (i + 1)..seq.len() {
            if seq[i] > seq[j] {
                s = -s;
            }
        }
    }
    s
}

fn sorted3(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

fn put(target: &mut DenseMatrix, row: usize, col: usize, n: usize, block: &DenseMatrix, factor: f64) {
    let mut view = target.view_mut((row * n, col * n), (n, n));
    view += block * factor;
}

/// Swaps block positions `(r, c) -> (c, r)` without transposing the blocks themselves.
fn block_transpose(m: &DenseMatrix, n: usize) -> DenseMatrix {
    let (br, bc) = (m.nrows() / n, m.ncols() / n);
    let mut out = DenseMatrix::zeros(m.ncols(), m.nrows());
    for r in 0..br {
        for c in 0..bc {
            out.view_mut((c * n, r * n), (n, n)).copy_from(&m.view((r * n, c * n), (n, n)));
        }
    }
    out
}

/// `I_k ⊗ X` for a square block `X`.
fn repeat_block(x: &DenseMatrix, k: usize) -> DenseMatrix {
    let n = x.nrows();
    let mut out = DenseMatrix::zeros(k * n, k * n);
    for i in 0..k {
        out.view_mut((i * n, i * n), (n, n)).copy_from(x);
    }
    out
}

/// Two-form × three-form operator `Σ_m sgn(m, l₁, l₂) op_m`, acting on sorted tuples.
fn pair_triple_operator(map: &ModeMap, d: usize, ops: &[DenseMatrix]) -> DenseMatrix {
    let n = map.modes;
    let mut k = DenseMatrix::zeros(map.pairs.len() * n, map.triples.len() * n);
    for (p, &[l1, l2]) in map.pairs.iter().enumerate() {
        for m in (0..d).filter(|m| *m != l1 && *m != l2) {
            let t = map.triple_index(sorted3([m, l1, l2])).expect("distinct indices");
            put(&mut k, p, t, n, &ops[m], perm_sign(&[m, l1, l2]));
        }
    }
    k
}

/// One-form × two-form operator with block `(k; i₁<i₂) = δ^{i₁}_k op_{i₂} − δ^{i₂}_k op_{i₁}`.
fn vector_pair_operator(map: &ModeMap, d: usize, ops: &[DenseMatrix]) -> DenseMatrix {
    let n = map.modes;
    let mut z = DenseMatrix::zeros(d * n, map.pairs.len() * n);
    for (p, &[i1, i2]) in map.pairs.iter().enumerate() {
        put(&mut z, i1, p, n, &ops[i2], 1.0);
        put(&mut z, i2, p, n, &ops[i1], -1.0);
    }
    z
}

fn row_operator(d: usize, ops: &[DenseMatrix]) -> DenseMatrix {
    let n = ops[0].nrows();
    let mut z = DenseMatrix::zeros(n, d * n);
    for (k, op) in ops.iter().enumerate() {
        z.view_mut((0, k * n), (n, n)).copy_from(op);
    }
    z
}

fn labels(map: &ModeMap) -> Vec<String> {
    let tag = |t: &[usize; 3]| format!("{}{}{}", t[0] + 1, t[1] + 1, t[2] + 1);
    let mut out = Vec::new();
    for prefix in ["A", "pi"] {
        for t in &map.triples {
            for m in 0..map.modes {
                out.push(format!("{prefix}{}#{m}", tag(t)));
            }
        }
    }
    out
}

/// Builds the constraint set `(−3 ∂^{k} π_{k i₁ i₂}, −∂_{k} A^{k j₁ j₂})` with its two reducibility levels.
pub fn build_threeform(spec: &LatticeSpec, tol: &Tolerance) -> Result<ThreeFormSystem> {
    let spec = LatticeSpec::new(spec.d, spec.l, spec.derivative)?;
    let (d, v) = (spec.d, spec.sites());
    let ones = DenseMatrix::from_element(1, v, 1.0);
    let basis = null_basis(&ones, tol)?;
    let modes = basis.ncols();
    let derivatives: Vec<DenseMatrix> =
        (0..d).map(|a| basis.transpose() * site_derivative(&spec, a) * &basis).collect();
    let laplacian = derivatives.iter().fold(DenseMatrix::zeros(modes, modes), |acc, x| acc + x.transpose() * x);
    let laplacian_inv = inverse_full_rank(&laplacian, tol, "lattice Laplacian")?;
    let map = ModeMap::new(d, modes);
    let divergence = pair_triple_operator(&map, d, &derivatives);

    let n_fields = map.triples.len() * modes;
    let half = map.pairs.len() * modes;
    let mut b = DenseMatrix::zeros(2 * half, 2 * n_fields);
    b.view_mut((0, n_fields), (half, n_fields)).copy_from(&(&divergence * -3.0));
    b.view_mut((half, 0), (half, n_fields)).copy_from(&(-&divergence));
    let chi: Vec<PhaseFunction> = (0..b.nrows()).map(|i| PhaseFunction::affine(b.row(i).transpose(), 0.0)).collect();

    let z1_op = vector_pair_operator(&map, d, &derivatives);
    let z1 = block_diag(&z1_op, &z1_op).transpose();
    let z2_op = row_operator(d, &derivatives);
    let z2 = block_diag(&z2_op, &z2_op).transpose();

    let mut phase = PhaseSpec::canonical(n_fields);
    phase.labels = Some(labels(&map));
    let name = format!("three-form d={} L={}", spec.d, spec.l);
    let cs = ConstraintSet::new(name, phase, chi, Reducibility::Constant(z1), Some(Reducibility::Constant(z2)))?;
    Ok(ThreeFormSystem { lattice: spec, cs, mode_map: map, basis, derivatives, laplacian, laplacian_inv, divergence })
}

impl ThreeFormSystem {
    pub fn field_count(&self) -> usize {
        self.mode_map.triples.len() * self.mode_map.modes
    }

    /// Dimension of the transverse subspace, `C(d−1, 3)` per nonzero momentum.
    pub fn transverse_count(&self) -> usize {
        let k = self.lattice.d - 1;
        k * (k.saturating_sub(1)) * (k.saturating_sub(2)) / 6 * self.mode_map.modes
    }

    /// `∂^i` as it appears on the left of a kernel: the adjoint `−D_iᵀ`.
    fn upper(&self) -> Vec<DenseMatrix> {
        self.derivatives.iter().map(|x| -x.transpose()).collect()
    }

    fn box_inv(&self) -> DenseMatrix {
        -&self.laplacian_inv
    }

    /// Closed-form transverse projector `δ − ∂^{[i}δδ^{k]} ∂_{[i'}δδ_{k']} / □` on sorted triples.
    pub fn closed_form_projector(&self) -> DenseMatrix {
        let map = &self.mode_map;
        let d = self.lattice.d;
        let left = block_transpose(&pair_triple_operator(map, d, &self.upper()), map.modes);
        let right = pair_triple_operator(map, d, &self.derivatives);
        let inv = repeat_block(&self.box_inv(), map.pairs.len());
        let n = self.field_count();
        DenseMatrix::identity(n, n) - left * inv * right
    }

    /// Closed-form `D^{α₀}_{β₀}` for one family, rows and columns indexed by sorted pairs.
    pub fn closed_form_d00_block(&self) -> DenseMatrix {
        let map = &self.mode_map;
        let n = map.modes;
        let d = self.lattice.d;
        let up = self.upper();
        let lo = &self.derivatives;
        let bi = self.box_inv();
        let np = map.pairs.len();
        let mut out = DenseMatrix::identity(np * n, np * n);
        for (r, &[a, b]) in map.pairs.iter().enumerate() {
            for (c, &[p, q]) in map.pairs.iter().enumerate() {
                let mut acc = DenseMatrix::zeros(n, n);
                for k in 0..d {
                    let left = match (k == b, k == a) {
                        (true, _) => up[a].clone(),
                        (_, true) => -&up[b],
                        _ => continue,
                    };
                    let right = match (k == q, k == p) {
                        (true, _) => lo[p].clone(),
                        (_, true) => -&lo[q],
                        _ => continue,
                    };
                    acc += left * right;
                }
                put(&mut out, r, c, n, &(acc * &bi), -1.0);
            }
        }
        out
    }

    /// Closed-form `D^i_j = δ − ∂^i ∂_j / □` for one family.
    pub fn closed_form_d11_block(&self) -> DenseMatrix {
        let n = self.mode_map.modes;
        let d = self.lattice.d;
        let up = self.upper();
        let bi = self.box_inv();
        let mut out = DenseMatrix::identity(d * n, d * n);
        for i in 0..d {
            for j in 0..d {
                put(&mut out, i, j, n, &(&up[i] * &self.derivatives[j] * &bi), -1.0);
            }
        }
        out
    }

    /// `ω̃^up` coupling the two families through `δ^k_l / (2□²)`, rescaled to sorted pairs.
    pub fn paper_omega_up(&self) -> DenseMatrix {
        let d = self.lattice.d;
        let inv2 = &self.laplacian_inv * &self.laplacian_inv * 2.0;
        let block = repeat_block(&inv2, d);
        let n = block.nrows();
        let mut out = DenseMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, n), (n, n)).copy_from(&block);
        out.view_mut((n, 0), (n, n)).copy_from(&(-&block));
        out
    }

    /// `Ê = blockdiag(−2□, −□)`, rescaled to sorted pairs.
    pub fn paper_ehat(&self) -> DenseMatrix {
        let d = self.lattice.d;
        let lap = repeat_block(&self.laplacian, d);
        block_diag(&(&lap * -1.0), &(&lap * -0.5))
    }

    /// Expected gradient rows of χ̃ on `(A, π, π_k, A^l)` assembled from the stencils.
    pub fn expected_chi_tilde_rows(&self) -> DenseMatrix {
        let map = &self.mode_map;
        let (d, n) = (self.lattice.d, map.modes);
        let nf = self.field_count();
        let (b, _) = self.cs.affine_parts().expect("linear constraints");
        let half = map.pairs.len() * n;
        let vec_dim = d * n;
        let mut out = DenseMatrix::zeros(2 * half + 2 * n, 2 * nf + 2 * vec_dim);
        out.view_mut((0, 0), (2 * half, 2 * nf)).copy_from(&b);
        let grad = -block_transpose(&vector_pair_operator(map, d, &self.upper()), n);
        out.view_mut((0, 2 * nf), (half, vec_dim)).copy_from(&(&grad * -1.0));
        out.view_mut((half, 2 * nf + vec_dim), (half, vec_dim)).copy_from(&(&grad * -0.5));
        let div = row_operator(d, &self.derivatives);
        out.view_mut((2 * half, 2 * nf), (n, vec_dim)).copy_from(&div);
        out.view_mut((2 * half + n, 2 * nf + vec_dim), (n, vec_dim)).copy_from(&div);
        out
    }

    /// Largest entry of a reduced operator, lifted to sites, outside the nearest-neighbour stencil.
    pub fn stencil_leak(&self, block: &DenseMatrix) -> f64 {
        let lifted = &self.basis * block * self.basis.transpose();
        let v = self.lattice.sites();
        let l = self.lattice.l;
        let mut worst: f64 = 0.0;
        for x in 0..v {
            let cx = site_coords(x, &self.lattice);
            for y in 0..v {
                let cy = site_coords(y, &self.lattice);
                let dist: usize = cx
                    .iter()
                    .zip(&cy)
                    .map(|(&a, &b)| {
                        let diff = (a + l - b) % l;
                        diff.min(l - diff)
                    })
                    .sum();
                if dist > 1 {
                    worst = worst.max(lifted[(x, y)].abs());
                }
            }
        }
        worst
    }
}

fn tagged(name: &str, r: f64, tol: &Tolerance, scale: f64) -> CheckRecord {
    CheckRecord::bound(name, r, tol.weak_bound(scale))
}

/// Engine run on the lattice: every generic identity plus the closed-form comparisons.
pub fn run_threeform_checks(sys: &ThreeFormSystem, tol: &Tolerance) -> Result<CheckReport> {
    let started = Instant::now();
    let cs = &sys.cs;
    let at = PhasePoint::origin(cs.dim());
    let mut report = validate(cs, std::slice::from_ref(&at), tol)?;
    let art = second_order_artifacts(cs, &at, tol)?;
    report.extend(art.checks(cs, tol)?);
    let irr = build_irreducible(cs, &art, &EhatChoice::Identity, tol)?;
    report.extend(irr.checks(tol, 7)?);

    let poisson = &cs.spec.poisson;
    let oracle = oracle_fundamental(cs, &at, tol)?;
    let noninv = art.fundamental(poisson, BracketMode::Noninvertible);
    let inv = art.fundamental(poisson, BracketMode::Invertible);
    let ext = ExtendedPoint::on_base(&at, cs.m1());
    let irred = z_block(&irr, &ext)?;
    let scale = max_abs(&oracle);
    report.push(tagged("eq_14q", max_diff(&noninv, &oracle), tol, scale));
    report.push(tagged("eq_24", max_diff(&inv, &oracle), tol, scale));
    report.push(tagged("eq_32", max_diff(&irred, &oracle), tol, scale));

    let nf = sys.field_count();
    let closed = sys.closed_form_projector();
    report.push(tagged("eq_v23", max_diff(&oracle.view((0, nf), (nf, nf)).into_owned(), &closed), tol, 1.0));
    let aa = max_abs(&oracle.view((0, 0), (nf, nf)).into_owned());
    let pp = max_abs(&oracle.view((nf, nf), (nf, nf)).into_owned());
    report.push(tagged("eq_29", aa.max(pp), tol, 1.0));
    report.push(tagged("eq_30_idempotence", weak_equal(&(&closed * &closed), &closed, tol).0, tol, 1.0));
    let unit_modes = singular_values(&closed)?.iter().filter(|&&s| s > 0.5).count();
    report.push(CheckRecord::count("eq_30_rank", unit_modes, sys.transverse_count()));
    let trace = closed.trace();
    report.push(tagged("eq_30_trace", (trace - sys.transverse_count() as f64).abs(), tol, nf as f64));

    let d00_block = sys.closed_form_d00_block();
    let d00_closed = block_diag(&d00_block, &d00_block);
    report.push(tagged("eq_w23", max_diff(&art.d00, &d00_closed), tol, 1.0));
    let d11_block = sys.closed_form_d11_block();
    report.push(tagged("eq_38", max_diff(&art.d11, &block_diag(&d11_block, &d11_block)), tol, 1.0));
    report.push(tagged("eq_x23", weak_equal(&(&d00_closed * &d00_closed), &d00_closed, tol).0, tol, 1.0));
    report.timings.insert("threeform_engine".into(), started.elapsed().as_secs_f64());
    Ok(report)
}

fn z_block(irr: &IrreducibleSystem, at: &ExtendedPoint) -> Result<DenseMatrix> {
    let n = irr.n();
    Ok(irr.fundamental_ext(at)?.view((0, 0), (n, n)).into_owned())
}

/// The irreducible system built from the closed-form choices of `ω̃^up` and `Ê`.
pub fn paper_choices_system(sys: &ThreeFormSystem, tol: &Tolerance) -> Result<(SecondOrderArtifacts, IrreducibleSystem)> {
    let at = PhasePoint::origin(sys.cs.dim());
    let art = second_order_artifacts_with_omega(&sys.cs, &at, &sys.paper_omega_up(), tol)?;
    let irr = build_irreducible(&sys.cs, &art, &EhatChoice::Custom(sys.paper_ehat()), tol)?;
    Ok((art, irr))
}

/// Checks of the closed-form choices: χ̃ rows, `[y, y]`, `A^{α₁}_{α₀}`, locality and agreement with the engine.
pub fn paper_choices_report(sys: &ThreeFormSystem, tol: &Tolerance) -> Result<CheckReport> {
    let started = Instant::now();
    let cs = &sys.cs;
    let mut report = CheckReport::new(format!("{} (closed-form choices)", cs.name), *tol);
    let (art, irr) = paper_choices_system(sys, tol)?;
    report.extend(art.checks(cs, tol)?);
    report.extend(irr.checks(tol, 11)?);

    let base = PhasePoint::origin(cs.dim());
    let at = ExtendedPoint::on_base(&base, cs.m1());
    let rows = irr.gradients(&at)?;
    let expected = sys.expected_chi_tilde_rows();
    let n = sys.mode_map.modes;
    let half = sys.mode_map.pairs.len() * n;
    let cols = rows.ncols();
    let diff_rows = |start: usize, count: usize| {
        max_diff(&rows.view((start, 0), (count, cols)).into_owned(), &expected.view((start, 0), (count, cols)).into_owned())
    };
    report.push(tagged("eq_58", diff_rows(0, half), tol, 1.0));
    report.push(tagged("eq_59", diff_rows(half, half), tol, 1.0));
    report.push(tagged("eq_72", diff_rows(2 * half, 2 * n), tol, 1.0));

    let vec_dim = sys.lattice.d * n;
    let eye = DenseMatrix::identity(vec_dim, vec_dim);
    let zero = DenseMatrix::zeros(vec_dim, vec_dim);
    let canonical = crate::numerics::block2x2(&zero, &(-&eye), &eye, &zero);
    report.push(tagged("eq_q33", max_diff(&irr.omega_y, &canonical), tol, 1.0));
    let z1 = cs.z1_at(&base);
    let a01_expected = &z1 * block_diag(&(&eye * -1.0), &(&eye * -0.5));
    report.push(tagged("eq_43", max_diff(&irr.a01, &a01_expected), tol, 1.0));

    if sys.lattice.derivative == Derivative::ForwardDifference {
        let mut leak: f64 = 0.0;
        for r in 0..rows.nrows() / n {
            for c in 0..cols / n {
                leak = leak.max(sys.stencil_leak(&rows.view((r * n, c * n), (n, n)).into_owned()));
            }
        }
        report.push(tagged("chi_tilde_locality", leak, tol, 1.0));
    }

    let engine = oracle_fundamental(cs, &base, tol)?;
    let closed = z_block(&irr, &at)?;
    report.push(tagged("closed_form_vs_engine", max_diff(&closed, &engine), tol, max_abs(&engine)));
    report.timings.insert("threeform_closed_form".into(), started.elapsed().as_secs_f64());
    Ok(report)
}

/// Lattice field `f` sampled on sites, projected onto the zero-mean basis.
pub fn reduce_field(sys: &ThreeFormSystem, site_values: &Vector) -> Result<Vector> {
    if site_values.len() != sys.lattice.sites() {
        return Err(Error::InvalidInput(format!(
            "expected {} site values, got {}",
            sys.lattice.sites(),
            site_values.len()
        )));
    }
    Ok(sys.basis.transpose() * site_values)
}
