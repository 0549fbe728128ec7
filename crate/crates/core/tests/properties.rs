use approx::assert_abs_diff_eq;
use dirac_core::constraints::{sample_surface, synth_linear, toy_system, SystemFile};
use dirac_core::first_order::ambiguity_record;
use dirac_core::numerics::{
    antisymmetry_residual, max_abs, max_diff, null_basis, pseudoinverse, random_antisymmetric, random_gaussian,
    rank_tol, skew_solve,
};
use dirac_core::oracle::{independent_subset_ordered, oracle_fundamental};
use dirac_core::phase::bracket_with;
use dirac_core::second_order::{ambiguity_records, second_order_artifacts};
use dirac_core::{BracketMode, DenseMatrix, PhaseFunction, Tolerance, Vector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> DenseMatrix {
    let mut r = rng(seed);
    random_gaussian(rows, rank, &mut r) * random_gaussian(rank, cols, &mut r)
}

fn linear(dim: usize, seed: u64) -> PhaseFunction {
    PhaseFunction::affine(random_gaussian(dim, 1, &mut rng(seed)).column(0).into_owned(), 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pseudoinverse_penrose_conditions(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()) {
        let a = random_gaussian(rows, cols, &mut rng(seed));
        let p = pseudoinverse(&a, &tol()).unwrap();
        prop_assert!(max_diff(&(&a * &p * &a), &a) < 1e-9);
        prop_assert!(max_diff(&(&p * &a * &p), &p) < 1e-9);
        prop_assert!(antisymmetry_residual(&(&a * &p)) < 1e-9 || max_diff(&(&a * &p), &(&a * &p).transpose()) < 1e-9);
    }

    #[test]
    fn pseudoinverse_of_antisymmetric_is_antisymmetric(n in 2usize..9, seed in any::<u64>()) {
        let c = random_antisymmetric(n, &mut rng(seed));
        let p = pseudoinverse(&c, &tol()).unwrap();
        prop_assert!(max_diff(&p, &(-p.transpose())) < 1e-9 * (1.0 + max_abs(&p)));
    }

    #[test]
    fn rank_preserved_by_invertible_factors(rows in 2usize..8, cols in 2usize..8, k in 1usize..4, seed in any::<u64>()) {
        let rank = k.min(rows).min(cols);
        let a = low_rank(rows, cols, rank, seed);
        let mut r = rng(seed ^ 1);
        let left = random_gaussian(rows, rows, &mut r) + DenseMatrix::identity(rows, rows) * 4.0;
        let right = random_gaussian(cols, cols, &mut r) + DenseMatrix::identity(cols, cols) * 4.0;
        prop_assert_eq!(rank_tol(&a, &tol()).unwrap(), rank);
        prop_assert_eq!(rank_tol(&(left * &a * right), &tol()).unwrap(), rank);
    }

    #[test]
    fn null_basis_is_orthonormal_kernel(rows in 1usize..7, cols in 1usize..8, k in 1usize..4, seed in any::<u64>()) {
        let rank = k.min(rows).min(cols);
        let a = low_rank(rows, cols, rank, seed);
        let n = null_basis(&a, &tol()).unwrap();
        prop_assert_eq!(n.ncols(), cols - rank);
        if n.ncols() > 0 {
            prop_assert!(max_abs(&(&a * &n)) < 1e-9 * (1.0 + max_abs(&a)));
            prop_assert!(max_diff(&(n.transpose() * &n), &DenseMatrix::identity(n.ncols(), n.ncols())) < 1e-10);
        }
    }

    #[test]
    fn skew_solve_returns_antisymmetric_inverse_on_range(n in 2usize..8, seed in any::<u64>()) {
        let c = random_antisymmetric(n, &mut rng(seed));
        let target = pseudoinverse(&c, &tol()).unwrap() * &c;
        let m = skew_solve(&c, &target, &tol()).unwrap();
        prop_assert!(antisymmetry_residual(&m) < 1e-12);
        prop_assert!(max_diff(&(&m * &c), &target) < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn brackets_are_antisymmetric_and_bilinear(sys_seed in 0u64..50, fn_seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let cs = synth_linear(6, 8, 4, 2, sys_seed).unwrap();
        let at = sample_surface(&cs, sys_seed, 1, &tol()).unwrap().remove(0);
        let art = second_order_artifacts(&cs, &at, &tol()).unwrap();
        let dim = cs.dim();
        let (f, g, h) = (linear(dim, fn_seed), linear(dim, fn_seed ^ 7), linear(dim, fn_seed ^ 13));
        for mode in [BracketMode::Noninvertible, BracketMode::Invertible] {
            let p = art.fundamental(&cs.spec.poisson, mode);
            let fg = bracket_with(&p, &f, &g, &at).unwrap();
            let gf = bracket_with(&p, &g, &f, &at).unwrap();
            prop_assert!((fg + gf).abs() < 1e-9);
            let (PhaseFunction::Affine { b: bf, .. }, PhaseFunction::Affine { b: bh, .. }) = (&f, &h) else { unreachable!() };
            let combo = PhaseFunction::affine(bf * a + bh * b, 0.0);
            let lhs = bracket_with(&p, &combo, &g, &at).unwrap();
            let rhs = a * fg + b * bracket_with(&p, &h, &g, &at).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn first_order_ambiguity_invariance(sys_seed in 0u64..50, shift_seed in any::<u64>()) {
        let cs = synth_linear(6, 8, 4, 0, sys_seed).unwrap();
        let at = sample_surface(&cs, sys_seed, 1, &tol()).unwrap().remove(0);
        let rec = ambiguity_record(&cs, &at, 3, shift_seed, &tol()).unwrap();
        prop_assert!(rec.pass, "{:?}", rec);
    }

    #[test]
    fn second_order_ambiguity_invariance(sys_seed in 0u64..50, shift_seed in any::<u64>()) {
        let cs = synth_linear(6, 8, 4, 2, sys_seed).unwrap();
        let at = sample_surface(&cs, sys_seed, 1, &tol()).unwrap().remove(0);
        for rec in ambiguity_records(&cs, &at, 3, shift_seed, &tol()).unwrap() {
            prop_assert!(rec.pass, "{:?}", rec);
        }
    }

    #[test]
    fn subset_choice_does_not_matter(sys_seed in 0u64..50, perm_seed in any::<u64>()) {
        let cs = synth_linear(6, 8, 4, 2, sys_seed).unwrap();
        let at = sample_surface(&cs, sys_seed, 1, &tol()).unwrap().remove(0);
        let reference = oracle_fundamental(&cs, &at, &tol()).unwrap();
        let mut r = rng(perm_seed);
        for _ in 0..5 {
            let mut order: Vec<usize> = (0..cs.m0()).collect();
            order.shuffle(&mut r);
            let sel = independent_subset_ordered(&cs, &at, &order, &tol()).unwrap();
            prop_assert_eq!(sel.indices.len(), cs.independent_count());
            prop_assert!(max_diff(&sel.fundamental(&cs, &at).unwrap(), &reference) < 1e-8);
        }
    }

    #[test]
    fn system_file_round_trip(seed in 0u64..200) {
        let cs = synth_linear(5, 6, 4, 2, seed).unwrap();
        let text = SystemFile::from_constraint_set(&cs).unwrap().to_json();
        let back = SystemFile::parse(&text).unwrap().to_constraint_set("round trip", &tol()).unwrap();
        let at = sample_surface(&cs, seed, 1, &tol()).unwrap().remove(0);
        prop_assert!(max_diff(&back.gradients(&at).unwrap(), &cs.gradients(&at).unwrap()) < 1e-15);
        prop_assert!(max_diff(&back.z1_at(&at), &cs.z1_at(&at)) == 0.0);
    }
}

#[test]
fn toy_bracket_values_are_exact() {
    let cs = toy_system();
    let at = dirac_core::PhasePoint::from_slice(&[0.0, 0.4, 0.0, -1.3]);
    let p = oracle_fundamental(&cs, &at, &tol()).unwrap();
    assert_abs_diff_eq!(p[(1, 3)], 1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(p[(0, 2)], 0.0, epsilon = 1e-14);
    let v = Vector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
    assert_abs_diff_eq!((&p * v)[3], -1.0, epsilon = 1e-14);
}
