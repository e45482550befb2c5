use wsp::covariance::{gemini_covariances, huber_covariance, sample_covariance};
use wsp::linalg::{invert_spd, kronecker};
use wsp::simulate::{
    correlation_of_inverse, make_toeplitz_precision, rng_for, sample_gaussian_with, sample_matrix_normal_with,
    sample_mvt_with, sample_nonparanormal_with, CdfTransform,
};
use wsp::{Matrix, SymMatrix};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn toeplitz_sigma(p: usize, rho: f64) -> SymMatrix {
    invert_spd(&make_toeplitz_precision(p, rho).unwrap()).unwrap()
}

/// Plain `1/n` covariance of the columns, written out directly.
fn empirical_cov(x: &Matrix) -> Matrix {
    let (n, p) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    Matrix::from_fn(p, p, |a, b| {
        (0..n)
            .map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]))
            .sum::<f64>()
            / n as f64
    })
}

fn max_abs_diff(a: &Matrix, b: &SymMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_matrix().as_slice())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn sample_covariance_error_on_toeplitz() {
    let sigma = toeplitz_sigma(10, 0.5);
    let errs: Vec<f64> = (0..20)
        .map(|r| {
            let data = sample_gaussian_with(200, &sigma, &mut rng_for(1, r)).unwrap();
            sample_covariance(&data).unwrap().matrix.sub(&sigma).unwrap().max_abs()
        })
        .collect();
    assert!(median(errs.clone()) < 0.35, "{errs:?}");
}

#[test]
fn gaussian_sampler_near_identity() {
    let p = 5;
    let n = 4000;
    let errs: Vec<f64> = (0..20)
        .map(|r| {
            let data = sample_gaussian_with(n, &SymMatrix::identity(p), &mut rng_for(4, r)).unwrap();
            max_abs_diff(&empirical_cov(data.values()), &SymMatrix::identity(p))
        })
        .collect();
    assert!(median(errs) <= 5.0 / (n as f64).sqrt());
}

#[test]
fn huber_beats_sample_on_heavy_tails() {
    let sigma = toeplitz_sigma(50, 0.5);
    let mut wins = 0;
    for r in 0..20 {
        let data = sample_mvt_with(200, &sigma, 3.5, &mut rng_for(3, r)).unwrap();
        let h = huber_covariance(&data, 2.0, 1e-3)
            .unwrap()
            .matrix
            .sub(&sigma)
            .unwrap()
            .max_abs();
        let s = sample_covariance(&data).unwrap().matrix.sub(&sigma).unwrap().max_abs();
        wins += usize::from(h <= s);
    }
    assert!(wins >= 14, "huber no worse in {wins}/20");
}

#[test]
fn mvt_covariance_matches_scale() {
    let sigma = correlation_of_inverse(&make_toeplitz_precision(10, 0.5).unwrap()).unwrap();
    let errs: Vec<f64> = (0..20)
        .map(|r| {
            let data = sample_mvt_with(2000, &sigma, 3.5, &mut rng_for(8, r)).unwrap();
            max_abs_diff(&empirical_cov(data.values()), &sigma)
        })
        .collect();
    assert!(median(errs.clone()) <= 0.2, "{errs:?}");
}

/// Kolmogorov–Smirnov distance of `x` to the standard normal.
fn ks_normal(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(k, &v)| {
            let f = 0.5 * libm::erfc(-v / std::f64::consts::SQRT_2);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn mvt_with_huge_nu_is_gaussian() {
    let sigma = SymMatrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]]).unwrap();
    let n = 1000;
    // 5% critical value of the one-sample KS statistic
    let crit = 1.358 / (n as f64).sqrt();
    let accepted = (0..20)
        .filter(|&r| {
            let data = sample_mvt_with(n, &sigma, 1e6, &mut rng_for(12, r)).unwrap();
            ks_normal(data.column(0)) <= crit && ks_normal(data.column(1)) <= crit
        })
        .count();
    assert!(accepted >= 17, "{accepted}/20");
    let gauss = sample_gaussian_with(20_000, &sigma, &mut rng_for(13, 0)).unwrap();
    let heavy = sample_mvt_with(20_000, &sigma, 1e6, &mut rng_for(13, 1)).unwrap();
    let d =
        max_abs_diff(&empirical_cov(gauss.values()), &sigma).max(max_abs_diff(&empirical_cov(heavy.values()), &sigma));
    assert!(d < 0.05, "{d}");
}

#[test]
fn nonparanormal_marginals_follow_transform() {
    let sigma = correlation_of_inverse(&make_toeplitz_precision(4, 0.5).unwrap()).unwrap();
    let (x, z) = sample_nonparanormal_with(2000, &sigma, 0.05, 0.4, &mut rng_for(21, 0)).unwrap();
    let t = CdfTransform::new(0.05, 0.4).unwrap();
    for i in 0..x.n() {
        for j in 0..x.p() {
            assert_eq!(x.values()[(i, j)], t.apply(z.values()[(i, j)]));
        }
    }
    // the latent draw carries the requested correlation
    assert!(max_abs_diff(&empirical_cov(z.values()), &sigma) < 0.1);
    // and the transformed columns keep the latent ordering
    for j in 0..x.p() {
        let (a, b) = (x.column(j), z.column(j));
        for k in 1..a.len() {
            assert_eq!(a[k - 1] < a[k], b[k - 1] < b[k]);
        }
    }
}

#[test]
fn matrix_normal_has_kronecker_covariance() {
    let a = SymMatrix::from_rows(&[[1.0, 0.4, 0.0], [0.4, 1.5, 0.2], [0.0, 0.2, 0.8]]).unwrap();
    let b = SymMatrix::from_rows(&[[1.0, -0.3], [-0.3, 0.6]]).unwrap();
    let draws = sample_matrix_normal_with(6000, &a, &b, &mut rng_for(5, 0)).unwrap();
    // vec(X) stacks columns: entry k*f + i is X[i, k]
    let (f, m) = (2, 3);
    let stacked = Matrix::from_fn(draws.len(), m * f, |t, r| draws[t][(r % f, r / f)]);
    let truth = SymMatrix::try_from(kronecker(a.as_matrix(), b.as_matrix()).unwrap()).unwrap();
    let err = max_abs_diff(&empirical_cov(&stacked), &truth);
    assert!(err <= 0.15, "{err}");

    let scalar = sample_matrix_normal_with(
        8000,
        &SymMatrix::from_diag(&[2.0]),
        &SymMatrix::from_diag(&[1.5]),
        &mut rng_for(5, 1),
    )
    .unwrap();
    let var = scalar.iter().map(|x| x[(0, 0)] * x[(0, 0)]).sum::<f64>() / scalar.len() as f64;
    assert!((var - 3.0).abs() < 0.2, "{var}");
}

#[test]
fn gemini_identity_factors_concentrate() {
    let draws = sample_matrix_normal_with(
        50,
        &SymMatrix::identity(4),
        &SymMatrix::identity(3),
        &mut rng_for(11, 0),
    )
    .unwrap();
    let (sa, sb) = gemini_covariances(&draws).unwrap();
    assert!(sa.matrix.sub(&SymMatrix::identity(4)).unwrap().max_abs() <= 0.25);
    assert!(sb.matrix.sub(&SymMatrix::identity(3)).unwrap().max_abs() <= 0.25);
}
