use wsp::covariance::sample_covariance;
use wsp::linalg::{invert_spd, matrix_norm};
use wsp::scio::{column_objective, log_grid, scio_column, scio_estimate, scio_path};
use wsp::simulate::{make_toeplitz_precision, rng_for, sample_gaussian_with};
use wsp::theory::{check_bounds, error_report, oracle_tune};
use wsp::{NormKind, SymMatrix};

fn toeplitz_pair(p: usize, rho: f64) -> (SymMatrix, SymMatrix) {
    let omega = make_toeplitz_precision(p, rho).unwrap();
    let sigma = invert_spd(&omega).unwrap();
    (omega, sigma)
}

/// Proximal gradient on `½βᵀSβ − β_i + λ|β|₁` with step `1/L`, `L` a
/// Gershgorin bound on the top eigenvalue.
fn ista(s: &SymMatrix, i: usize, lambda: f64, iters: usize) -> Vec<f64> {
    let p = s.dim();
    let l = (0..p)
        .map(|r| s.row(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut beta = vec![0.0; p];
    for _ in 0..iters {
        let grad: Vec<f64> = (0..p)
            .map(|r| s.row(r).iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() - f64::from(r == i))
            .collect();
        for r in 0..p {
            let z = beta[r] - grad[r] / l;
            beta[r] = z.signum() * (z.abs() - lambda / l).max(0.0);
        }
    }
    beta
}

#[test]
fn two_by_two_agrees_with_proximal_gradient() {
    let s = SymMatrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
    let cd = scio_column(&s, 0, 0.1, None).unwrap();
    let pg = ista(&s, 0, 0.1, 20_000);
    for k in 0..2 {
        assert!((cd.beta[k] - pg[k]).abs() <= 1e-10, "{:?} vs {pg:?}", cd.beta);
    }
}

#[test]
fn sample_pilot_columns_agree_with_proximal_gradient() {
    let (_, sigma) = toeplitz_pair(12, 0.6);
    let data = sample_gaussian_with(80, &sigma, &mut rng_for(17, 0)).unwrap();
    let s = sample_covariance(&data).unwrap().matrix;
    for (i, lambda) in [(0, 0.05), (5, 0.2), (11, 0.01)] {
        let cd = scio_column(&s, i, lambda, None).unwrap();
        let pg = ista(&s, i, lambda, 200_000);
        let gap = column_objective(&s, i, lambda, &cd.beta) - column_objective(&s, i, lambda, &pg);
        assert!(gap <= 1e-10, "column {i}: objective gap {gap}");
        let diff = cd.beta.iter().zip(&pg).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-6, "column {i}: {diff}");
    }
}

#[test]
fn warm_path_matches_cold_solves() {
    let (_, sigma) = toeplitz_pair(25, 0.5);
    let data = sample_gaussian_with(200, &sigma, &mut rng_for(2, 0)).unwrap();
    let s = sample_covariance(&data).unwrap().matrix;
    let grid = log_grid(1.0, 30, 2.0);
    let path = scio_path(&s, &grid).unwrap();
    for (k, &lambda) in grid.iter().enumerate() {
        let cold = scio_estimate(&s, lambda, None).unwrap();
        let d = path.estimates[k].omega_tilde.sub(&cold.omega_tilde).unwrap().max_abs();
        assert!(d <= 1e-8, "lambda {lambda}: {d}");
    }
}

#[test]
fn different_warm_starts_reach_the_same_column() {
    let (_, sigma) = toeplitz_pair(15, 0.4);
    let data = sample_gaussian_with(120, &sigma, &mut rng_for(9, 0)).unwrap();
    let s = sample_covariance(&data).unwrap().matrix;
    let far: Vec<f64> = (0..15).map(|k| (k as f64 - 7.0) / 3.0).collect();
    for i in [0, 7, 14] {
        let a = scio_column(&s, i, 0.03, None).unwrap();
        let b = scio_column(&s, i, 0.03, Some(&far)).unwrap();
        let d = a
            .beta
            .iter()
            .zip(&b.beta)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d <= 1e-7, "column {i}: {d}");
    }
}

#[test]
fn population_pilot_meets_elementwise_bound() {
    let (omega, sigma) = toeplitz_pair(10, 0.5);
    let m = matrix_norm(omega.as_matrix(), NormKind::L1).unwrap();
    // largest grid value with ‖Ω‖^{-q} λ^{1−q} s_p ≤ ½ at q = 0.5
    let s_p = (0..10)
        .map(|j| omega.row(j).iter().map(|w| w.abs().sqrt()).sum::<f64>())
        .fold(0.0, f64::max);
    let lambda = log_grid(1.0, 60, 6.0)
        .into_iter()
        .find(|&l| m.powf(-0.5) * l.sqrt() * s_p <= 0.5)
        .unwrap();
    let est = scio_estimate(&sigma, lambda, None).unwrap();
    let err = est.omega_tilde.sub(&omega).unwrap().max_abs();
    assert!(err <= 4.0 * m * lambda, "{err} > {}", 4.0 * m * lambda);
}

#[test]
fn toeplitz_bound_check_at_largest_admissible_lambda() {
    let (omega, sigma) = toeplitz_pair(20, 0.3);
    let mut found = false;
    for lambda in log_grid(1.0, 40, 4.0) {
        let b = check_bounds(&omega, &sigma, &sigma, lambda, 0.5).unwrap();
        if b.hypotheses_hold {
            assert!(b.all_satisfied(), "{b:?}");
            found = true;
            break;
        }
    }
    assert!(found);
}

#[test]
fn oracle_tune_matches_exhaustive_scan() {
    let (omega, sigma) = toeplitz_pair(20, 0.5);
    let data = sample_gaussian_with(150, &sigma, &mut rng_for(6, 0)).unwrap();
    let s = sample_covariance(&data).unwrap().matrix;
    let grid = log_grid(1.0, 30, 2.0);
    let path = scio_path(&s, &grid).unwrap();
    for kind in NormKind::ALL {
        let (lambda, report) = oracle_tune(&path, &omega, kind).unwrap();
        let scan: Vec<f64> = path
            .estimates
            .iter()
            .map(|e| error_report(&e.omega_tilde, &omega).unwrap().get(kind))
            .collect();
        let best = scan.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(report.get(kind), best);
        let k = grid.iter().position(|&l| l == lambda).unwrap();
        assert_eq!(scan[k], best);
    }
}
