mod common;

use common::{random_grid, random_problem, random_values};
use isaacs_core::decomposition::{decompose_matrix, max_min_value, reconstruction_residual};
use isaacs_core::grid::{Domain, Grid, Stencil};
use isaacs_core::harness::barrier::{auto_tune, verify_barrier};
use isaacs_core::operators::{PucciParams, Scheme, Truncation, TruncationLevel};
use isaacs_core::problem::{rotated_diag, Mat2, Point, SmoothTestFunction};
use isaacs_core::solver::policy_rows;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn swap(a: &Mat2) -> Mat2 {
    Mat2::new(a[(1, 1)], a[(1, 0)], a[(0, 1)], a[(0, 0)])
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(32)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn f_is_monotone_in_the_hessian(seed in any::<u64>(), l1 in 0.0..2.0f64, l2 in 0.0..2.0f64, theta in 0.0..3.2f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, 2, 3);
        let m = rotated_diag(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..3.2));
        let p = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let x = Point::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
        let lo = SmoothTestFunction::quadratic(m, p, 0.0);
        let hi = SmoothTestFunction::quadratic(m + rotated_diag(l1, l2, theta), p, 0.0);
        prop_assert!(problem.eval_f(&hi, &x) >= problem.eval_f(&lo, &x) - 1e-12);
    }

    #[test]
    fn f_does_not_increase_under_constant_shift(seed in any::<u64>(), kappa in 0.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, 3, 2);
        let m = rotated_diag(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..3.2));
        let p = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let x = Point::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
        let base = problem.eval_f(&SmoothTestFunction::quadratic(m, p, 0.0), &x);
        let shifted = problem.eval_f(&SmoothTestFunction::quadratic(m, p, kappa), &x);
        prop_assert!(shifted <= base + 1e-12);
    }

    #[test]
    fn max_min_value_scales_linearly(l1 in 0.3..3.0f64, l2 in 0.3..3.0f64, theta in 0.0..3.2f64, t in 0.1..10.0f64) {
        let a = rotated_diag(l1, l2, theta);
        for stencil in [Stencil::default_four(), Stencil::extended_eight()] {
            let v = max_min_value(&a, &stencil);
            let w = max_min_value(&(a * t), &stencil);
            match (v, w) {
                (Some(v), Some(w)) => prop_assert!((w - t * v).abs() <= 1e-9 * (1.0 + t * v.abs())),
                (None, None) => {}
                _ => prop_assert!(false, "feasibility changed under scaling"),
            }
        }
    }

    #[test]
    fn decomposition_respects_coordinate_swap(l1 in 0.3..3.0f64, l2 in 0.3..3.0f64, theta in 0.0..3.2f64) {
        let a = rotated_diag(l1, l2, theta);
        let b = swap(&a);
        for stencil in [Stencil::default_four(), Stencil::extended_eight()] {
            let v = max_min_value(&a, &stencil);
            let w = max_min_value(&b, &stencil);
            match (v, w) {
                (Some(v), Some(w)) => prop_assert!((v - w).abs() <= 1e-9),
                (None, None) => {}
                _ => prop_assert!(false, "feasibility changed under swap"),
            }
        }
    }

    #[test]
    fn feasible_decompositions_reconstruct(l1 in 0.5..2.0f64, l2 in 0.5..2.0f64, theta in 0.0..3.2f64) {
        let a = rotated_diag(l1, l2, theta);
        let stencil = Stencil::extended_eight();
        let (coeffs, least) = decompose_matrix(&a, &stencil, 0.0).unwrap();
        prop_assert!(reconstruction_residual(&coeffs, &stencil, &a) <= 1e-12);
        prop_assert!(coeffs.iter().all(|&c| c >= least - 1e-12) && least >= 0.0);
    }

    #[test]
    fn lattice_translation_preserves_the_grid(i in -5i64..5, j in -5i64..5, k in 0usize..3) {
        let h = [0.125, 0.1, 0.0625][k];
        let domain = Domain::disk(Point::new(0.03, -0.02), 0.9);
        let stencil = Stencil::default_four();
        let grid = Grid::build(&domain, &stencil, h).unwrap();
        let shift = Point::new(i as f64 * h, j as f64 * h);
        let moved = Grid::build(&domain.translated(&shift), &stencil, h).unwrap();
        prop_assert_eq!(grid.len(), moved.len());
        prop_assert_eq!(grid.n_interior(), moved.n_interior());
        for id in 0..grid.len() {
            let [a, b] = grid.lattice(id);
            let other = moved.id_of(a + i, b + j);
            prop_assert!(other.is_some());
            prop_assert_eq!(grid.class(id), moved.class(other.unwrap()));
        }
    }

    #[test]
    fn grid_refinement_keeps_interior_points(k in 0usize..3) {
        let h = [0.25, 0.2, 0.125][k];
        let domain = Domain::ellipse(Point::zeros(), 1.0, 0.7);
        let stencil = Stencil::default_four();
        let coarse = Grid::build(&domain, &stencil, h).unwrap();
        let fine = Grid::build(&domain, &stencil, h / 2.0).unwrap();
        for &id in coarse.interior_ids() {
            let [a, b] = coarse.lattice(id as usize);
            let f = fine.id_of(2 * a, 2 * b);
            prop_assert!(f.is_some_and(|f| fine.is_interior(f)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn truncations_bracket_and_order_in_k(seed in any::<u64>(), k in 1.0..20.0f64, dk in 0.0..20.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, 2, 2);
        let grid = random_grid(&mut rng);
        let scheme = Scheme::new(&problem, &grid, PucciParams::default_for(&problem.bounds), 0.0).unwrap();
        let u = random_values(&mut rng, grid.len());
        let small = TruncationLevel::new(k).unwrap();
        let large = TruncationLevel::new(k + dk).unwrap();
        for ord in 0..grid.n_interior() {
            let plain = scheme.eval_at(&u, ord, Truncation::None).value;
            let up_small = scheme.eval_at(&u, ord, Truncation::Upper(small)).value;
            let up_large = scheme.eval_at(&u, ord, Truncation::Upper(large)).value;
            let lo_small = scheme.eval_at(&u, ord, Truncation::Lower(small)).value;
            let lo_large = scheme.eval_at(&u, ord, Truncation::Lower(large)).value;
            prop_assert!(up_large >= plain && plain >= lo_large);
            prop_assert!(up_small >= up_large && lo_small <= lo_large);
        }
    }

    #[test]
    fn scheme_is_monotone_in_neighbors(seed in any::<u64>(), bump in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, 2, 2);
        let grid = random_grid(&mut rng);
        let scheme = Scheme::new(&problem, &grid, PucciParams::default_for(&problem.bounds), 0.0).unwrap();
        let u = random_values(&mut rng, grid.len());
        let ord = rng.gen_range(0..grid.n_interior());
        let center = grid.interior_ids()[ord] as usize;
        let mut raised = u.clone();
        for (id, v) in raised.iter_mut().enumerate() {
            if id != center && rng.gen_bool(0.5) {
                *v += bump;
            }
        }
        let mut lifted = u.clone();
        lifted[center] += bump;
        for truncation in [Truncation::None, Truncation::Upper(TruncationLevel::new(2.0).unwrap()), Truncation::Lower(TruncationLevel::new(2.0).unwrap())] {
            let base = scheme.eval_at(&u, ord, truncation).value;
            prop_assert!(scheme.eval_at(&raised, ord, truncation).value >= base - 1e-12);
            prop_assert!(scheme.eval_at(&lifted, ord, truncation).value <= base + 1e-12);
        }
    }

    #[test]
    fn policy_rows_give_m_matrices(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = random_problem(&mut rng, 2, 3);
        let grid = random_grid(&mut rng);
        let scheme = Scheme::new(&problem, &grid, PucciParams::default_for(&problem.bounds), 0.0).unwrap();
        let policy: Vec<(usize, usize)> = (0..grid.n_interior()).map(|_| (rng.gen_range(0..2), rng.gen_range(0..3))).collect();
        for row in policy_rows(&scheme, &policy) {
            prop_assert!(row.c >= 0.0);
            prop_assert!(row.weights.iter().all(|&(_, w)| w >= 0.0));
            prop_assert!(row.diagonal() > 0.0);
        }
    }

    #[test]
    fn tuned_barrier_passes_its_own_check(delta in 0.2..0.9f64, k1 in 1.0..10.0f64, seed in any::<u64>()) {
        let domain = Domain::disk(Point::zeros(), 1.0);
        let (barrier, slack) = auto_tune(&domain, delta, k1, 500, seed).unwrap();
        prop_assert!(slack < -0.99);
        prop_assert!(verify_barrier(&barrier, &domain, delta, k1, 500, seed).is_ok());
    }
}
