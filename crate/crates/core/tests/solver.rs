mod common;

use common::*;
use gl_lab::rng::GaussianStream;
use gl_lab::solver::{group_lasso_from, lambda_max, objective};
use gl_lab::{
    group_lasso, kkt_residual, lasso_union_rows, restricted_group_lasso, support, DenseMatrix, Matrix, SolverConfig,
    SupportSet,
};
use proptest::prelude::*;

fn instance(n: usize, p: usize, k: usize, seed: u64) -> (Matrix, Matrix) {
    (gaussian(n, p, seed), gaussian(n, k, seed.wrapping_add(1)))
}

#[test]
fn matches_proximal_gradient_oracle() {
    for seed in 0..10 {
        let (x, y) = instance(30, 8, 2, seed);
        let sol = group_lasso(&x, &y, &SolverConfig::new(0.1)).unwrap();
        let oracle = prox_grad_group_lasso(&x, &y, 0.1, 1_000_000);
        assert!(frob_diff(&sol.b_hat, &oracle) <= 1e-6, "seed {seed}");
        let f_oracle = common::objective(&x, &y, &oracle, 0.1);
        assert!((sol.objective - f_oracle).abs() <= 1e-8 * f_oracle);
    }
}

#[test]
fn objective_field_is_consistent() {
    let (x, y) = instance(25, 10, 3, 7);
    let sol = group_lasso(&x, &y, &SolverConfig::new(0.15)).unwrap();
    let recomputed = common::objective(&x, &y, &sol.b_hat, 0.15);
    assert!((sol.objective - recomputed).abs() <= 1e-10 * recomputed);
    assert!((objective(&x, &y, &sol.b_hat, 0.15).unwrap() - recomputed).abs() <= 1e-10 * recomputed);
}

#[test]
fn objective_is_monotone_over_sweeps() {
    for seed in 0..20 {
        let (x, y) = instance(20, 30, 2, 100 + seed);
        let sol = group_lasso(&x, &y, &SolverConfig::new(0.05).tracking_objective()).unwrap();
        for w in sol.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn zero_solution_threshold_both_directions() {
    for seed in 0..10 {
        let (x, y) = instance(30, 12, 2, 200 + seed);
        let lmax = lambda_max(&x, &y).unwrap();
        let above = group_lasso(&x, &y, &SolverConfig::new(lmax + 1e-8)).unwrap();
        assert!(above.support.is_empty());
        let kkt = kkt_residual(&x, &y, &above.b_hat, lmax + 1e-8).unwrap();
        assert_eq!(kkt.max_violation, 0.0);
        let below = group_lasso(&x, &y, &SolverConfig::new(lmax - 1e-8)).unwrap();
        assert!(!below.support.is_empty());
    }
}

#[test]
fn kkt_bounds_dual_matrix() {
    let (x, y) = instance(40, 15, 2, 9);
    let sol = group_lasso(&x, &y, &SolverConfig::new(0.08)).unwrap();
    let kkt = kkt_residual(&x, &y, &sol.b_hat, 0.08).unwrap();
    assert!(kkt.max_violation <= 1e-7);
    assert!(max_row_norm(&kkt.z_hat) <= 1.0 + kkt.max_violation + 1e-12);
}

#[test]
fn restricted_matches_deleted_columns() {
    let (x, y) = instance(50, 20, 2, 31);
    let s: Vec<usize> = vec![1, 4, 5, 9, 13];
    let x_s = x.select_cols(&s);
    let cfg = SolverConfig::new(0.05).with_tol(1e-12);
    let a = restricted_group_lasso(&x_s, &y, &cfg).unwrap();
    let b = group_lasso(&x_s, &y, &cfg).unwrap();
    assert!(frob_diff(&a.b_hat, &b.b_hat) <= 1e-9);
    let huge = restricted_group_lasso(&x_s, &y, &SolverConfig::new(1e6)).unwrap();
    assert!(huge.support.is_empty());
}

#[test]
fn restricted_solution_is_unique() {
    let (x, y) = instance(40, 6, 3, 77);
    let cfg = SolverConfig::new(0.1).with_tol(1e-12);
    let reference = restricted_group_lasso(&x, &y, &cfg).unwrap().b_hat;
    for seed in 0..5 {
        let init = gaussian(6, 3, 1000 + seed).scale(3.0);
        let sol = group_lasso_from(&x, &y, &cfg, init).unwrap();
        assert!(frob_diff(&sol.b_hat, &reference) <= 1e-7);
    }
}

#[test]
fn support_of_constructed_coefficients() {
    let spec = gl_lab::EnsembleSpec::standard(gl_lab::Family::Orthonormal, 40, 8, 0.1);
    let c = gl_lab::make_coefficients::<f64>(&spec, 0).unwrap();
    assert_eq!(support(&c.b, 1e-10), c.support);
}

#[test]
fn lasso_union_recovers_disjoint_supports() {
    let (n, p) = (200, 30);
    let x = gaussian(n, p, 5);
    let mut bstar = DenseMatrix::zeros(p, 2);
    for &i in &[0, 3, 7] {
        bstar[(i, 0)] = 1.0;
    }
    for &i in &[10, 12] {
        bstar[(i, 1)] = -1.0;
    }
    let y = x.matmul(&bstar).unwrap();
    let u = lasso_union_rows(&x, &y, &SolverConfig::new(0.01)).unwrap();
    assert_eq!(u, SupportSet::new(vec![0, 3, 7, 10, 12], p).unwrap());

    // duplicate task contributes nothing new
    let y1 = y.select_cols(&[0, 0]);
    let single = lasso_union_rows(&x, &y.select_cols(&[0]), &SolverConfig::new(0.01)).unwrap();
    assert_eq!(lasso_union_rows(&x, &y1, &SolverConfig::new(0.01)).unwrap(), single);
}

#[test]
fn f32_solver_agrees_with_f64() {
    let (x, y) = instance(30, 8, 2, 4);
    let s64 = group_lasso(&x, &y, &SolverConfig::new(0.1)).unwrap();
    let mut cfg = SolverConfig::<f32>::new(0.1);
    cfg.tol = 1e-6;
    cfg.kkt_tol = 1e-4;
    let s32 = group_lasso(&x.cast::<f32>(), &y.cast::<f32>(), &cfg).unwrap();
    assert!(frob_diff(&s32.b_hat.cast(), &s64.b_hat) <= 1e-4);
    assert_eq!(s32.support, s64.support);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn converged_solves_are_kkt_certified(seed in any::<u64>(), lambda in 0.01f64..0.5) {
        let (x, y) = instance(25, 12, 2, seed);
        let sol = group_lasso(&x, &y, &SolverConfig::new(lambda)).unwrap();
        prop_assert!(sol.converged);
        let kkt = kkt_residual(&x, &y, &sol.b_hat, lambda).unwrap();
        prop_assert!(kkt.max_violation <= 1e-7);
        let f_oracle = common::objective(&x, &y, &prox_grad_group_lasso(&x, &y, lambda, 1_000_000), lambda);
        prop_assert!(sol.objective <= f_oracle * (1.0 + 1e-8));
    }

    #[test]
    fn homogeneous_in_y_and_lambda(seed in any::<u64>(), c in 0.1f64..10.0) {
        let (x, y) = instance(30, 6, 2, seed);
        let cfg = SolverConfig::new(0.1).with_tol(1e-13);
        let base = group_lasso(&x, &y, &cfg).unwrap();
        let mut scaled_cfg = SolverConfig::new(0.1 * c).with_tol(1e-13 * c);
        scaled_cfg.kkt_tol = 1e-7 * c;
        let scaled = group_lasso(&x, &y.scale(c), &scaled_cfg).unwrap();
        prop_assert!(frob_diff(&scaled.b_hat, &base.b_hat.scale(c)) <= 1e-9 * c.max(1.0));
    }
}

#[test]
fn perturbed_optimum_is_flagged() {
    let mut g = GaussianStream::new(3, 3, 3);
    let (x, y) = instance(30, 8, 2, 12);
    let sol = group_lasso(&x, &y, &SolverConfig::new(0.1)).unwrap();
    let mut b = sol.b_hat.clone();
    let i = sol.support.indices()[0];
    b[(i, 0)] += 1e-3 * g.normal().signum();
    assert!(kkt_residual(&x, &y, &b, 0.1).unwrap().max_violation >= 1e-5);
}
