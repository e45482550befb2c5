use rayon::prelude::*;

use super::{psd_project, CovarianceError, CovarianceEstimate, CovarianceKind, DataMatrix, Result};
use crate::linalg::SymMatrix;

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_WIDTH: f64 = 1e-12;

/// Huber score: `x` clamped to `[-h, h]`.
#[inline]
pub fn huber_psi(x: f64, h: f64) -> f64 {
    x.clamp(-h, h)
}

/// Truncation level `H = K (n / log p)^{1/2}`.
pub fn huber_truncation(k_const: f64, n: usize, p: usize) -> Result<f64> {
    if !(k_const > 0.0) || !k_const.is_finite() {
        return Err(CovarianceError::InvalidParameter(format!(
            "Huber constant must be positive, got {k_const}"
        )));
    }
    if p < 2 {
        return Err(CovarianceError::TooFewVariables { required: 2, got: p });
    }
    Ok(k_const * (n as f64 / (p as f64).ln()).sqrt())
}

/// Root of `μ ↦ Σ_k ψ_H(x_k − μ)`.
///
/// The estimating function is continuous and nonincreasing, with a root in
/// `[min x − H, max x + H]`. Both ends of the (possibly flat) zero set are
/// located by bisection and their midpoint is returned.
pub fn huber_location(x: &[f64], h: f64) -> f64 {
    assert!(!x.is_empty(), "Huber location of an empty sample");
    assert!(h > 0.0, "Huber truncation must be positive");
    let (min, max) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if min == max {
        return min;
    }
    let score = |mu: f64| -> f64 { x.iter().map(|&v| huber_psi(v - mu, h)).sum() };

    // sup { μ : score(μ) > 0 }
    let left = bisect(min - h, max + h, |mu| score(mu) > 0.0);
    // inf { μ : score(μ) < 0 }
    let right = bisect(min - h, max + h, |mu| score(mu) >= 0.0);
    0.5 * (left + right)
}

/// Boundary of a monotone predicate that is true at `lo` and false at `hi`.
fn bisect(mut lo: f64, mut hi: f64, below: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BISECTION_WIDTH * mid.abs().max(1.0) {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Huber covariance before projection: the raw `σ̃_ij` and the truncation `H`.
pub fn huber_raw(data: &DataMatrix, k_const: f64) -> Result<(SymMatrix, f64)> {
    data.require_samples(2)?;
    let (n, p) = (data.n(), data.p());
    let h = huber_truncation(k_const, n, p)?;
    let columns: Vec<Vec<f64>> = (0..p).map(|j| data.column(j)).collect();
    let means: Vec<f64> = columns.par_iter().map(|c| huber_location(c, h)).collect();

    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let products: Vec<f64> = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).collect();
            huber_location(&products, h) - means[i] * means[j]
        })
        .collect();

    let mut raw = crate::linalg::Matrix::zeros(p, p);
    for (&(i, j), v) in pairs.iter().zip(values) {
        raw[(i, j)] = v;
    }
    Ok((SymMatrix::from_lower(&raw)?, h))
}

/// Huber-type covariance projected onto `{Σ ⪰ εI}`.
pub fn huber_covariance(data: &DataMatrix, k_const: f64, epsilon: f64) -> Result<CovarianceEstimate> {
    let (raw, h) = huber_raw(data, k_const)?;
    let matrix = psd_project(&raw, epsilon)?;
    Ok(CovarianceEstimate {
        matrix,
        kind: CovarianceKind::Huber,
        huber_h: Some(h),
        projected: true,
        epsilon: Some(epsilon),
    })
}
