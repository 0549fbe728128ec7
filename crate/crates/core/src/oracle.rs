//! Ground-truth Dirac bracket from a maximal independent constraint subset.

use std::fmt;
use std::str::FromStr;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::first_order::{default_lift_data, first_order_artifacts, irreducible_lift_1};
use crate::irreducible::{build_default, ExtendedPoint};
use crate::numerics::{inverse_full_rank, max_abs, max_diff, DenseMatrix, Tolerance, Vector};
use crate::phase::{bracket_with, dirac_matrix, PhaseFunction, PhasePoint};
use crate::report::{CheckRecord, CheckReport};
use crate::second_order::{second_order_artifacts, BracketMode};

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    /// Strictly increasing constraint indices.
    pub indices: Vec<usize>,
    pub cab: DenseMatrix,
    pub cab_inv: DenseMatrix,
}

fn residual_norm(v: &Vector, basis: &[Vector]) -> Vector {
    let mut r = v.clone();
    for q in basis {
        let c = q.dot(&r);
        r -= q * c;
    }
    r
}

fn selection_cutoff(g: &DenseMatrix, tol: &Tolerance) -> f64 {
    let largest = (0..g.nrows()).map(|i| g.row(i).norm()).fold(0.0_f64, f64::max);
    tol.rank_rel.sqrt() * largest
}

/// Greedy pivoting: repeatedly takes the gradient with the largest component orthogonal to those
/// already chosen, breaking ties toward the lowest index.
pub fn independent_subset(cs: &ConstraintSet, at: &PhasePoint, tol: &Tolerance) -> Result<SubsetSelection> {
    cs.ensure_on_surface(at, tol)?;
    let g = cs.gradients(at)?;
    let target = cs.independent_count();
    let cut = selection_cutoff(&g, tol);
    let mut residual = g.clone();
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < target {
        let mut best: Option<usize> = None;
        let mut best_norm = cut;
        for i in 0..residual.nrows() {
            let norm = residual.row(i).norm();
            if norm > best_norm && !chosen.contains(&i) {
                best_norm = norm;
                best = Some(i);
            }
        }
        let i = best.ok_or_else(|| {
            Error::Degenerate(format!("only {} independent constraints, expected {target}", chosen.len()))
        })?;
        let q: Vector = residual.row(i).transpose() / best_norm;
        let coeffs = &residual * &q;
        residual.ger(-1.0, &coeffs, &q, 1.0);
        chosen.push(i);
    }
    finish(cs, at, chosen, tol)
}

/// Selection that scans constraints in the given priority order and keeps each independent one.
pub fn independent_subset_ordered(
    cs: &ConstraintSet,
    at: &PhasePoint,
    order: &[usize],
    tol: &Tolerance,
) -> Result<SubsetSelection> {
    cs.ensure_on_surface(at, tol)?;
    let g = cs.gradients(at)?;
    let target = cs.independent_count();
    let cut = selection_cutoff(&g, tol);
    let mut basis: Vec<Vector> = Vec::new();
    let mut chosen = Vec::new();
    for &i in order {
        if i >= g.nrows() {
            return Err(Error::InvalidInput(format!("constraint index {i} out of range")));
        }
        if chosen.len() == target {
            break;
        }
        let r = residual_norm(&g.row(i).transpose(), &basis);
        if r.norm() > cut {
            basis.push(&r / r.norm());
            chosen.push(i);
        }
    }
    if chosen.len() < target {
        return Err(Error::Degenerate(format!("only {} independent constraints, expected {target}", chosen.len())));
    }
    finish(cs, at, chosen, tol)
}

fn finish(cs: &ConstraintSet, at: &PhasePoint, mut indices: Vec<usize>, tol: &Tolerance) -> Result<SubsetSelection> {
    indices.sort_unstable();
    let g = cs.gradients(at)?;
    let ga = g.select_rows(indices.iter());
    let cab = &ga * &cs.spec.poisson * ga.transpose();
    let cab_inv = inverse_full_rank(&cab, tol, "C_AB")?;
    Ok(SubsetSelection { indices, cab, cab_inv })
}

impl SubsetSelection {
    pub fn fundamental(&self, cs: &ConstraintSet, at: &PhasePoint) -> Result<DenseMatrix> {
        let g = cs.gradients(at)?.select_rows(self.indices.iter());
        Ok(dirac_matrix(&cs.spec.poisson, &g, &self.cab_inv))
    }
}

pub fn oracle_fundamental(cs: &ConstraintSet, at: &PhasePoint, tol: &Tolerance) -> Result<DenseMatrix> {
    independent_subset(cs, at, tol)?.fundamental(cs, at)
}

/// `[f,g] − [f,χ_A] M^{AB} [χ_B,g]` over the selected subset.
pub fn dirac_oracle(cs: &ConstraintSet, f: &PhaseFunction, g: &PhaseFunction, at: &PhasePoint, tol: &Tolerance) -> Result<f64> {
    bracket_with(&oracle_fundamental(cs, at, tol)?, f, g, at)
}

/// Bracket formulations that can produce a fundamental bracket matrix on the original variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Subset,
    FirstOrder,
    FirstOrderLift,
    Reducible,
    Invertible,
    Intermediate,
    Irreducible,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Subset => "subset",
            Method::FirstOrder => "first-order",
            Method::FirstOrderLift => "first-order-lift",
            Method::Reducible => "reducible",
            Method::Invertible => "invertible",
            Method::Intermediate => "intermediate",
            Method::Irreducible => "irreducible",
        }
    }

    /// All methods applicable to a system of the given order.
    pub fn for_order(order: usize) -> Vec<Method> {
        if order == 1 {
            vec![Method::Subset, Method::FirstOrder, Method::FirstOrderLift]
        } else {
            vec![Method::Subset, Method::Reducible, Method::Invertible, Method::Intermediate, Method::Irreducible]
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Method::Subset,
            Method::FirstOrder,
            Method::FirstOrderLift,
            Method::Reducible,
            Method::Invertible,
            Method::Intermediate,
            Method::Irreducible,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

/// `[z^a, z^b]*` on the original variables for one method.
pub fn fundamental(cs: &ConstraintSet, method: Method, at: &PhasePoint, tol: &Tolerance) -> Result<DenseMatrix> {
    let n = cs.dim();
    let poisson = &cs.spec.poisson;
    match method {
        Method::Subset => oracle_fundamental(cs, at, tol),
        Method::FirstOrder => Ok(first_order_artifacts(cs, at, tol)?.fundamental(poisson)),
        Method::FirstOrderLift => {
            let (gamma, a) = default_lift_data(cs, at)?;
            let lift = irreducible_lift_1(cs, &gamma, &a, at, tol)?;
            Ok(lift.fundamental(&lift.extend_point(at))?.view((0, 0), (n, n)).into_owned())
        }
        Method::Reducible => Ok(second_order_artifacts(cs, at, tol)?.fundamental(poisson, BracketMode::Noninvertible)),
        Method::Invertible => Ok(second_order_artifacts(cs, at, tol)?.fundamental(poisson, BracketMode::Invertible)),
        Method::Intermediate => {
            let sys = build_default(cs, at, tol)?;
            let e = ExtendedPoint::on_base(at, cs.m1());
            Ok(sys.fundamental_intermediate(&e)?.view((0, 0), (n, n)).into_owned())
        }
        Method::Irreducible => {
            let sys = build_default(cs, at, tol)?;
            let e = ExtendedPoint::on_base(at, cs.m1());
            Ok(sys.fundamental_ext(&e)?.view((0, 0), (n, n)).into_owned())
        }
    }
}

/// Max entrywise deviation between every pair of methods, with the subset oracle as reference.
pub fn compare_fundamental(cs: &ConstraintSet, methods: &[Method], at: &PhasePoint, tol: &Tolerance) -> Result<CheckReport> {
    let mut report = CheckReport::new(cs.name.clone(), *tol);
    let reference = oracle_fundamental(cs, at, tol)?;
    let bound = tol.weak_bound(max_abs(&reference));
    let mats: Vec<(Method, DenseMatrix)> =
        methods.iter().map(|&m| Ok((m, fundamental(cs, m, at, tol)?))).collect::<Result<_>>()?;
    for (m, p) in &mats {
        report.push(CheckRecord::bound(format!("{m}_vs_subset"), max_diff(p, &reference), bound));
    }
    for (i, (a, pa)) in mats.iter().enumerate() {
        for (b, pb) in &mats[i + 1..] {
            report.push(CheckRecord::bound(format!("{a}_vs_{b}"), max_diff(pa, pb), bound));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{duplicated_pair, sample_surface, synth_linear, toy_system};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn toy_subset() {
        let cs = toy_system();
        let at = PhasePoint::origin(4);
        let s = independent_subset(&cs, &at, &tol()).unwrap();
        assert_eq!(s.indices, vec![0, 3]);
        assert_eq!(s.cab, DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let q = |i| PhaseFunction::coordinate(4, i);
        assert!((dirac_oracle(&cs, &q(1), &q(3), &at, &tol()).unwrap() - 1.0).abs() < 1e-14);
        assert!(dirac_oracle(&cs, &q(0), &q(2), &at, &tol()).unwrap().abs() < 1e-14);
    }

    #[test]
    fn duplicated_pair_subset() {
        let cs = duplicated_pair();
        let s = independent_subset(&cs, &PhasePoint::origin(4), &tol()).unwrap();
        assert_eq!(s.indices.len(), 2);
    }

    #[test]
    fn synthetic_subset_and_casimirs() {
        let cs = synth_linear(10, 12, 8, 2, 1).unwrap();
        let at = sample_surface(&cs, 1, 1, &tol()).unwrap().remove(0);
        let s = independent_subset(&cs, &at, &tol()).unwrap();
        assert_eq!(s.indices.len(), 6);
        assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
        let p = s.fundamental(&cs, &at).unwrap();
        assert!(crate::numerics::antisymmetry_residual(&p) < 1e-12);
        assert!(max_abs(&(cs.gradients(&at).unwrap() * &p)) < 1e-9);
    }

    #[test]
    fn permuted_subsets_agree() {
        let cs = toy_system();
        let at = PhasePoint::from_slice(&[0.0, 0.5, 0.0, 0.1]);
        let reference = oracle_fundamental(&cs, &at, &tol()).unwrap();
        for order in [[5, 4, 3, 2, 1, 0], [2, 5, 1, 4, 0, 3], [1, 0, 4, 3, 2, 5]] {
            let s = independent_subset_ordered(&cs, &at, &order, &tol()).unwrap();
            assert!(max_diff(&s.fundamental(&cs, &at).unwrap(), &reference) < 1e-12);
        }
    }

    #[test]
    fn methods_parse_and_compare() {
        assert_eq!("irreducible".parse::<Method>().unwrap(), Method::Irreducible);
        assert!("bogus".parse::<Method>().is_err());
        let cs = toy_system();
        let rep = compare_fundamental(&cs, &Method::for_order(2), &PhasePoint::origin(4), &tol()).unwrap();
        assert!(rep.pass(), "{}", rep.to_table());
        let cs = duplicated_pair();
        let rep = compare_fundamental(&cs, &[Method::FirstOrder], &PhasePoint::origin(4), &tol()).unwrap();
        assert!(rep.pass(), "{}", rep.to_table());
    }
}
