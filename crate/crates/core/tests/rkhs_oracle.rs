mod common;

use common::*;
use funcreg_core::kernel::{default_sigma, default_sigma_prime, GramPair};
use funcreg_core::rkhs::{
    fit_with, gcv_select, influence_matrix, log_grid, objective, solve_dense, Solver, SpectralGram,
};
use funcreg_core::{Grid, PenaltyVariant, RkhsParams};
use nalgebra::DMatrix;

const VARIANTS: [PenaltyVariant; 2] = [PenaltyVariant::Standard, PenaltyVariant::Modified];

fn max_abs_diff(a: &Mat, b: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in a.iter().enumerate() {
        for (l, v) in row.iter().enumerate() {
            worst = worst.max((v - b[(i, l)]).abs());
        }
    }
    worst
}

#[test]
fn closed_form_matches_brute_force_minimiser() {
    let mut r = rng(11);
    for inst in 0..20u64 {
        let xs = brownian_set(100 + inst, 3, 4);
        let ys = random_set(&mut r, 3, 4);
        let sigma = default_sigma(&xs).unwrap();
        let sp = default_sigma_prime(xs.grid());
        let a = gram_a(&xs, sigma);
        let k = gram_k(4, sp);
        let y = rows_of(&ys);
        for lambda in [0.1, 1.0, 10.0] {
            for variant in VARIANTS {
                let oracle = brute_force_coefficients(&a, &k, &y, lambda, variant);
                let params = RkhsParams {
                    sigma,
                    sigma_prime: sp,
                    lambda,
                    variant,
                };
                for solver in [Solver::Spectral, Solver::Dense] {
                    let model = fit_with(&xs, &ys, &params, solver).unwrap();
                    let err = max_abs_diff(&oracle, model.coefficients());
                    assert!(
                        err <= 1e-6,
                        "instance {inst} lambda {lambda} {variant:?} {solver:?}: {err}"
                    );
                }
            }
        }
    }
}

#[test]
fn spectral_and_dense_solvers_agree() {
    let mut r = rng(12);
    for inst in 0..10u64 {
        let xs = brownian_set(200 + inst, 8, 12);
        let ys = random_set(&mut r, 8, 12);
        let gram = GramPair::build(
            &xs,
            default_sigma(&xs).unwrap(),
            default_sigma_prime(xs.grid()),
        )
        .unwrap();
        let spec = SpectralGram::new(&gram).unwrap();
        let y = ys.to_matrix();
        for lambda in [1e-2, 1.0, 100.0] {
            for variant in VARIANTS {
                let d = solve_dense(&gram, &y, lambda, variant).unwrap();
                let s = spec.solve(&y, lambda, variant).unwrap();
                let scale = d.amax().max(1.0);
                assert!((d - s).amax() / scale < 1e-8);
            }
        }
    }
}

#[test]
fn standard_solution_satisfies_residual_identity() {
    let mut r = rng(13);
    let xs = brownian_set(300, 6, 9);
    let ys = random_set(&mut r, 6, 9);
    let gram = GramPair::build(
        &xs,
        default_sigma(&xs).unwrap(),
        default_sigma_prime(xs.grid()),
    )
    .unwrap();
    let y = ys.to_matrix();
    for lambda in [0.01, 0.5, 20.0] {
        let b = solve_dense(&gram, &y, lambda, PenaltyVariant::Standard).unwrap();
        let resid = &y - gram.a() * &b * gram.k();
        assert!((resid - &b * lambda).amax() < 1e-9);
    }
}

#[test]
fn solution_is_a_local_minimum() {
    let mut r = rng(14);
    let xs = brownian_set(400, 5, 7);
    let ys = random_set(&mut r, 5, 7);
    let gram = GramPair::build(
        &xs,
        default_sigma(&xs).unwrap(),
        default_sigma_prime(xs.grid()),
    )
    .unwrap();
    let y = ys.to_matrix();
    for variant in VARIANTS {
        let b = solve_dense(&gram, &y, 0.3, variant).unwrap();
        let best = objective(&gram, &y, &b, 0.3, variant).unwrap();
        for _ in 0..50 {
            let dir = DMatrix::from_fn(5, 7, |_, _| normal(&mut r) * 1e-3);
            let moved = objective(&gram, &y, &(&b + dir), 0.3, variant).unwrap();
            assert!(moved >= best - 1e-12 * best.abs());
        }
    }
}

#[test]
fn functional_predictions_match_matrix_path() {
    let mut r = rng(15);
    for inst in 0..20u64 {
        let n = 3 + (inst as usize % 6);
        let t = 5 + (inst as usize % 9);
        let xs = brownian_set(500 + inst, n, t);
        let ys = random_set(&mut r, n, t);
        let params =
            RkhsParams::heuristic(&xs, 10f64.powf(normal(&mut r)), VARIANTS[inst as usize % 2])
                .unwrap();
        let model = fit_with(&xs, &ys, &params, Solver::Spectral).unwrap();
        let matrix_path = model.fitted_values().unwrap();
        let functional = model.predict_set(&xs).unwrap().to_matrix();
        let scale = matrix_path.amax().max(1.0);
        assert!((matrix_path - functional).amax() / scale <= 1e-10);
    }
}

#[test]
fn influence_eigenvalues_are_shrinkage_factors() {
    let xs = brownian_set(600, 4, 5);
    let gram = GramPair::build(
        &xs,
        default_sigma(&xs).unwrap(),
        default_sigma_prime(xs.grid()),
    )
    .unwrap();
    let lambda = 0.7;
    let infl = influence_matrix(&gram, lambda).unwrap();
    let mut got: Vec<f64> = nalgebra::SymmetricEigen::new(infl.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    let mu_a = nalgebra::SymmetricEigen::new(gram.a().clone()).eigenvalues;
    let mu_k = nalgebra::SymmetricEigen::new(gram.k().clone()).eigenvalues;
    let mut want: Vec<f64> = mu_a
        .iter()
        .flat_map(|a| mu_k.iter().map(move |k| a * k / (a * k + lambda)))
        .collect();
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-10);
    }
    assert!((&infl - infl.transpose()).amax() < 1e-10);
    let lower = influence_matrix(&gram, 0.1).unwrap().trace();
    assert!(lower > infl.trace());
}

#[test]
fn gcv_argmin_ignores_normalising_count() {
    let mut r = rng(16);
    let xs = brownian_set(700, 10, 15);
    let ys = random_set(&mut r, 10, 15);
    let gram = GramPair::build(
        &xs,
        default_sigma(&xs).unwrap(),
        default_sigma_prime(xs.grid()),
    )
    .unwrap();
    let spec = SpectralGram::new(&gram).unwrap();
    let y = ys.to_matrix();
    let grid = log_grid(1e-4, 1e3, 25).unwrap();
    let argmin = |count: f64| {
        let s: Vec<f64> = grid
            .iter()
            .map(|&l| {
                spec.gcv_with_count(&y, l, PenaltyVariant::Standard, count)
                    .unwrap()
            })
            .collect();
        funcreg_core::rkhs::first_argmin(&s).unwrap()
    };
    assert_eq!(argmin(150.0), argmin(300.0));
}

#[test]
fn gcv_dense_and_spectral_scores_agree() {
    let mut r = rng(17);
    let xs = brownian_set(800, 5, 6);
    let ys = random_set(&mut r, 5, 6);
    let gram = GramPair::build(
        &xs,
        default_sigma(&xs).unwrap(),
        default_sigma_prime(xs.grid()),
    )
    .unwrap();
    let spec = SpectralGram::new(&gram).unwrap();
    let y = ys.to_matrix();
    for lambda in [1e-3, 0.1, 10.0] {
        let d = funcreg_core::rkhs::gcv_score_dense(&gram, &y, lambda).unwrap();
        let s = spec.gcv(&y, lambda, PenaltyVariant::Standard).unwrap();
        assert!((d - s).abs() / d < 1e-8);
    }
}

#[test]
fn fit_is_permutation_equivariant() {
    let mut r = rng(18);
    let xs = brownian_set(900, 7, 8);
    let ys = random_set(&mut r, 7, 8);
    let perm = [3, 0, 6, 1, 5, 2, 4];
    let params = RkhsParams::heuristic(&xs, 0.2, PenaltyVariant::Standard).unwrap();
    let base = fit_with(&xs, &ys, &params, Solver::Dense).unwrap();
    let permuted = fit_with(
        &xs.select(&perm).unwrap(),
        &ys.select(&perm).unwrap(),
        &params,
        Solver::Dense,
    )
    .unwrap();
    for (new_i, &old_i) in perm.iter().enumerate() {
        for l in 0..8 {
            let d = base.coefficients()[(old_i, l)] - permuted.coefficients()[(new_i, l)];
            assert!(d.abs() < 1e-10);
        }
    }
}

#[test]
fn variants_coincide_when_covariates_are_far_apart() {
    let mut r = rng(19);
    let xs = brownian_set(1000, 5, 6);
    let ys = random_set(&mut r, 5, 6);
    let sp = default_sigma_prime(xs.grid());
    let tiny = default_sigma(&xs).unwrap() * 0.02;
    let gram = GramPair::build(&xs, tiny, sp).unwrap();
    let offdiag = (gram.a() - DMatrix::identity(5, 5)).amax();
    assert!(offdiag < 1e-12);
    let y = ys.to_matrix();
    let s = solve_dense(&gram, &y, 0.5, PenaltyVariant::Standard).unwrap();
    let m = solve_dense(&gram, &y, 0.5, PenaltyVariant::Modified).unwrap();
    assert!((s - m).amax() < 1e-9);
}

#[test]
fn larger_penalty_shrinks_the_penalty_term() {
    let mut r = rng(20);
    let xs = brownian_set(1100, 6, 10);
    let ys = random_set(&mut r, 6, 10);
    let gram = GramPair::build(
        &xs,
        default_sigma(&xs).unwrap(),
        default_sigma_prime(xs.grid()),
    )
    .unwrap();
    let y = ys.to_matrix();
    let spec = SpectralGram::new(&gram).unwrap();
    let mut prev = f64::INFINITY;
    for lambda in log_grid(1e-3, 1e3, 13).unwrap() {
        let b = spec.solve(&y, lambda, PenaltyVariant::Standard).unwrap();
        let pen = funcreg_core::rkhs::penalty(&gram, &b, PenaltyVariant::Standard).unwrap();
        assert!(pen <= prev * (1.0 + 1e-9));
        prev = pen;
    }
}

#[test]
fn interpolation_and_shrinkage_limits() {
    let mut r = rng(21);
    let xs = brownian_set(1200, 5, 10);
    let ys = random_set(&mut r, 5, 10);
    let sigma = default_sigma(&xs).unwrap();
    let params = RkhsParams {
        sigma,
        sigma_prime: 0.1,
        lambda: 1e-10,
        variant: PenaltyVariant::Standard,
    };
    let model = fit_with(&xs, &ys, &params, Solver::Dense).unwrap();
    let y = ys.to_matrix();
    let rel = (model.fitted_values().unwrap() - &y).norm() / y.norm();
    assert!(rel < 1e-4, "relative fitted error {rel}");

    let params = RkhsParams {
        lambda: 1e12,
        ..RkhsParams::heuristic(&xs, 1.0, PenaltyVariant::Standard).unwrap()
    };
    for variant in VARIANTS {
        let model = fit_with(
            &xs,
            &ys,
            &RkhsParams { variant, ..params },
            Solver::Spectral,
        )
        .unwrap();
        assert!(model.coefficients().amax() < 1e-9 * y.amax());
    }
}

#[test]
fn gcv_selects_a_finite_grid_point() {
    let mut r = rng(22);
    let xs = brownian_set(1300, 12, 20);
    let ys = random_set(&mut r, 12, 20);
    let grid = Grid::uniform(20).unwrap();
    let curve = gcv_select(
        &xs,
        &ys,
        default_sigma(&xs).unwrap(),
        default_sigma_prime(&grid),
        &funcreg_core::rkhs::default_lambda_grid(),
        PenaltyVariant::Standard,
    )
    .unwrap();
    assert_eq!(curve.scores.len(), 25);
    assert!(curve.scores.iter().all(|s| s.is_finite() && *s > 0.0));
    let min = curve.scores.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(curve.scores[curve.argmin_index], min);
}
