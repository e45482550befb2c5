//! Ground-truth matrices, synthetic data generators and weak-sparsity summaries.
//!
//! All samplers draw from ChaCha20 ([`rand_chacha::ChaCha20Rng`]), which is
//! portable across platforms. A run seeded with `seed` uses stream `k` of that
//! seed for replication `k`; see [`rng_for`].

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariance::DataMatrix;
use crate::linalg::{cholesky, invert_spd, matrix_norm, LinalgError, Matrix, NormKind, SymMatrix};

/// Recorded in experiment metadata so runs can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9); stream index = replication";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("dimension {p} is invalid: {reason}")]
    BadDimension { p: usize, reason: &'static str },
    #[error("rho = {rho} outside the admissible range {range}")]
    RhoOutOfRange { rho: f64, range: &'static str },
    #[error("degrees of freedom must exceed 2, got {0}")]
    NuTooSmall(f64),
    #[error("input is not a correlation matrix: diagonal entry {index} is {value}")]
    NotCorrelation { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// ChaCha20 generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `Ω = (ρ^{|i−j|})`.
pub fn make_toeplitz_precision(p: usize, rho: f64) -> Result<SymMatrix> {
    if p == 0 {
        return Err(SimError::BadDimension {
            p,
            reason: "must be positive",
        });
    }
    if !(rho.abs() < 1.0) {
        return Err(SimError::RhoOutOfRange { rho, range: "(-1, 1)" });
    }
    Ok(SymMatrix::from_fn(p, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// The 4×4 diamond-graph covariance block.
pub fn diamond_block(rho: f64) -> SymMatrix {
    let r2 = 2.0 * rho * rho;
    SymMatrix::from_rows(&[
        [1.0, rho, rho, r2],
        [rho, 1.0, 0.0, rho],
        [rho, 0.0, 1.0, rho],
        [r2, rho, rho, 1.0],
    ])
    .expect("block is symmetric")
}

/// `Ω = diag(A, …, A)⁻¹` for the diamond block `A`.
pub fn make_diamond_precision(p: usize, rho: f64) -> Result<SymMatrix> {
    if p == 0 || !p.is_multiple_of(4) {
        return Err(SimError::BadDimension {
            p,
            reason: "must be a positive multiple of 4",
        });
    }
    if !(rho.abs() < FRAC_1_SQRT_2) {
        return Err(SimError::RhoOutOfRange {
            rho,
            range: "(-1/sqrt 2, 1/sqrt 2)",
        });
    }
    let inv = invert_spd(&diamond_block(rho))?;
    Ok(SymMatrix::from_fn(p, |i, j| {
        if i / 4 == j / 4 {
            inv[(i % 4, j % 4)]
        } else {
            0.0
        }
    }))
}

/// Correlation matrix of `Ω₀⁻¹`: `D^{-1/2} Ω₀⁻¹ D^{-1/2}` with `D = diag(Ω₀⁻¹)`.
pub fn correlation_of_inverse(omega0: &SymMatrix) -> Result<SymMatrix> {
    let cov = invert_spd(omega0)?;
    let scale: Vec<f64> = cov.diag().iter().map(|d| d.sqrt()).collect();
    Ok(SymMatrix::from_fn(cov.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (scale[i] * scale[j])
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthConstructor {
    /// `Ω = (ρ^{|i−j|})`, `Σ = Ω⁻¹`.
    Toeplitz,
    /// `Σ = diag(A, …, A)`, `Ω = Σ⁻¹`.
    DiamondBlock,
    /// `Σ` = correlation of `Toeplitz(ρ)⁻¹`, `Ω = Σ⁻¹`.
    CorrelationOfInverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub constructor: TruthConstructor,
    pub rho: f64,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub omega: SymMatrix,
    pub sigma: SymMatrix,
}

impl TruthSpec {
    pub fn build(&self) -> Result<Truth> {
        match self.constructor {
            TruthConstructor::Toeplitz => {
                let omega = make_toeplitz_precision(self.p, self.rho)?;
                let sigma = invert_spd(&omega)?;
                Ok(Truth { omega, sigma })
            }
            TruthConstructor::DiamondBlock => {
                let omega = make_diamond_precision(self.p, self.rho)?;
                let block = diamond_block(self.rho);
                let sigma = SymMatrix::from_fn(self.p, |i, j| if i / 4 == j / 4 { block[(i % 4, j % 4)] } else { 0.0 });
                Ok(Truth { omega, sigma })
            }
            TruthConstructor::CorrelationOfInverse => {
                let sigma = correlation_of_inverse(&make_toeplitz_precision(self.p, self.rho)?)?;
                let omega = invert_spd(&sigma)?;
                Ok(Truth { omega, sigma })
            }
        }
    }

    pub fn sparsity_summary(&self, q: f64) -> Result<SparsitySummary> {
        let truth = self.build()?;
        let mut s = sparsity_summary(&truth.omega, q)?;
        if self.constructor == TruthConstructor::Toeplitz {
            s.s_p_limit = Some(toeplitz_sparsity_limit(self.rho, q));
        }
        Ok(s)
    }
}

fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Rows `L z` with `L = chol(Σ)` and `z` standard normal.
pub fn sample_gaussian_with<R: Rng + ?Sized>(n: usize, sigma: &SymMatrix, rng: &mut R) -> Result<DataMatrix> {
    let l = cholesky(sigma)?;
    let z = standard_normal_matrix(n, sigma.dim(), rng);
    let x = z.matmul(&l.transpose())?;
    DataMatrix::new(x).map_err(|e| SimError::InvalidParameter(e.to_string()))
}

pub fn sample_gaussian(n: usize, sigma: &SymMatrix, seed: u64) -> Result<DataMatrix> {
    sample_gaussian_with(n, sigma, &mut rng_for(seed, 0))
}

/// Multivariate t with `ν` degrees of freedom, scaled to have covariance `Σ`.
pub fn sample_mvt_with<R: Rng + ?Sized>(n: usize, sigma: &SymMatrix, nu: f64, rng: &mut R) -> Result<DataMatrix> {
    if !(nu > 2.0) {
        return Err(SimError::NuTooSmall(nu));
    }
    let l = cholesky(&sigma.scale((nu - 2.0) / nu))?;
    let chi = ChiSquared::new(nu).map_err(|e| SimError::InvalidParameter(e.to_string()))?;
    let p = sigma.dim();
    let mut x = Matrix::zeros(n, p);
    for k in 0..n {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let w: f64 = chi.sample(rng);
        let scale = (w / nu).sqrt().recip();
        let lz = l.matvec(&z)?;
        for (dst, v) in x.row_mut(k).iter_mut().zip(lz) {
            *dst = v * scale;
        }
    }
    DataMatrix::new(x).map_err(|e| SimError::InvalidParameter(e.to_string()))
}

pub fn sample_mvt(n: usize, sigma: &SymMatrix, nu: f64, seed: u64) -> Result<DataMatrix> {
    sample_mvt_with(n, sigma, nu, &mut rng_for(seed, 0))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Gaussian-CDF marginal transform, standardized to zero mean and unit
/// variance under a standard normal input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfTransform {
    pub mu: f64,
    pub sigma: f64,
    pub mean: f64,
    pub sd: f64,
}

impl CdfTransform {
    /// Computes the standardization constants by adaptive quadrature.
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() {
            return Err(SimError::InvalidParameter(format!(
                "transform needs finite mu and positive sigma, got ({mu}, {sigma})"
            )));
        }
        let g = |z: f64| normal_cdf((z - mu) / sigma);
        let (lo, hi) = (-12.0, 12.0);
        let mean = adaptive_simpson(&|z| g(z) * normal_pdf(z), lo, hi, 1e-13);
        let var = adaptive_simpson(&|z| (g(z) - mean).powi(2) * normal_pdf(z), lo, hi, 1e-13);
        Ok(Self {
            mu,
            sigma,
            mean,
            sd: var.sqrt(),
        })
    }

    pub fn apply(&self, z: f64) -> f64 {
        (normal_cdf((z - self.mu) / self.sigma) - self.mean) / self.sd
    }
}

/// Returns the transformed data and the latent Gaussian draw.
pub fn sample_nonparanormal_with<R: Rng + ?Sized>(
    n: usize,
    sigma: &SymMatrix,
    mu_g0: f64,
    sigma_g0: f64,
    rng: &mut R,
) -> Result<(DataMatrix, DataMatrix)> {
    for (index, value) in sigma.diag().into_iter().enumerate() {
        if value != 1.0 {
            return Err(SimError::NotCorrelation { index, value });
        }
    }
    let transform = CdfTransform::new(mu_g0, sigma_g0)?;
    let latent = sample_gaussian_with(n, sigma, rng)?;
    let z = latent.values();
    let x = Matrix::from_fn(z.rows(), z.cols(), |i, j| transform.apply(z[(i, j)]));
    let data = DataMatrix::new(x).map_err(|e| SimError::InvalidParameter(e.to_string()))?;
    Ok((data, latent))
}

pub fn sample_nonparanormal(n: usize, sigma: &SymMatrix, mu_g0: f64, sigma_g0: f64, seed: u64) -> Result<DataMatrix> {
    sample_nonparanormal_with(n, sigma, mu_g0, sigma_g0, &mut rng_for(seed, 0)).map(|(x, _)| x)
}

/// Matrix-normal draws `X(t) = L_B G(t) L_Aᵀ`, so `cov(vec X) = A ⊗ B`.
pub fn sample_matrix_normal_with<R: Rng + ?Sized>(
    n: usize,
    a: &SymMatrix,
    b: &SymMatrix,
    rng: &mut R,
) -> Result<Vec<Matrix>> {
    let la = cholesky(a)?;
    let lb = cholesky(b)?;
    let lat = la.transpose();
    (0..n)
        .map(|_| {
            let g = standard_normal_matrix(b.dim(), a.dim(), rng);
            Ok(lb.matmul(&g)?.matmul(&lat)?)
        })
        .collect()
}

pub fn sample_matrix_normal(n: usize, a: &SymMatrix, b: &SymMatrix, seed: u64) -> Result<Vec<Matrix>> {
    sample_matrix_normal_with(n, a, b, &mut rng_for(seed, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsitySummary {
    pub q: f64,
    /// Largest column sum of `|ω_ij|^q`.
    pub s_p: f64,
    /// Matrix ℓ1 norm of `Ω`.
    pub m_p: f64,
    /// `(1 + ρ^q) / (1 − ρ^q)` for Toeplitz truths.
    pub s_p_limit: Option<f64>,
}

fn abs_pow(x: f64, q: f64) -> f64 {
    if q == 0.0 {
        if x != 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        x.abs().powf(q)
    }
}

pub fn sparsity_summary(omega: &SymMatrix, q: f64) -> Result<SparsitySummary> {
    if !(0.0..1.0).contains(&q) {
        return Err(SimError::InvalidParameter(format!("q must lie in [0, 1), got {q}")));
    }
    let p = omega.dim();
    let s_p = (0..p)
        .map(|j| omega.row(j).iter().map(|&w| abs_pow(w, q)).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(SparsitySummary {
        q,
        s_p,
        m_p: matrix_norm(omega.as_matrix(), NormKind::L1)?,
        s_p_limit: None,
    })
}

/// Infinite-dimension column radius of a Toeplitz `(ρ^{|i−j|})` matrix.
pub fn toeplitz_sparsity_limit(rho: f64, q: f64) -> f64 {
    if rho == 0.0 {
        return 1.0;
    }
    let r = abs_pow(rho, q);
    if r >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 + r) / (1.0 - r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::sample_covariance;

    #[test]
    fn toeplitz_examples() {
        let t = make_toeplitz_precision(3, 0.5).unwrap();
        let expect = SymMatrix::from_rows(&[[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]]).unwrap();
        assert_eq!(t, expect);
        assert_eq!(make_toeplitz_precision(5, 0.0).unwrap(), SymMatrix::identity(5));
        assert!(cholesky(&make_toeplitz_precision(100, 0.8).unwrap()).is_ok());
        assert!(make_toeplitz_precision(3, 1.0).is_err());
    }

    #[test]
    fn diamond_examples() {
        assert_eq!(make_diamond_precision(8, 0.0).unwrap(), SymMatrix::identity(8));
        let a = diamond_block(0.5);
        assert_eq!(a[(0, 3)], 0.5);
        let omega = make_diamond_precision(4, 0.5).unwrap();
        let prod = a.as_matrix().matmul(omega.as_matrix()).unwrap();
        assert!(prod.sub(&Matrix::identity(4)).unwrap().max_abs() <= 1e-10);
        assert!(matches!(
            make_diamond_precision(8, 0.71),
            Err(SimError::RhoOutOfRange { .. })
        ));
        assert!(matches!(
            make_diamond_precision(6, 0.1),
            Err(SimError::BadDimension { .. })
        ));
    }

    #[test]
    fn constructors_are_spd_in_range() {
        for rho in [-0.7, -0.3, 0.0, 0.4, 0.7] {
            for c in [
                TruthConstructor::Toeplitz,
                TruthConstructor::DiamondBlock,
                TruthConstructor::CorrelationOfInverse,
            ] {
                let t = TruthSpec {
                    constructor: c,
                    rho,
                    p: 12,
                }
                .build()
                .unwrap();
                assert!(cholesky(&t.omega).is_ok(), "{c:?} {rho}");
                assert!(cholesky(&t.sigma).is_ok(), "{c:?} {rho}");
            }
        }
    }

    #[test]
    fn correlation_of_inverse_examples() {
        assert_eq!(
            correlation_of_inverse(&SymMatrix::identity(3)).unwrap(),
            SymMatrix::identity(3)
        );
        assert_eq!(
            correlation_of_inverse(&SymMatrix::from_diag(&[2.0, 5.0])).unwrap(),
            SymMatrix::identity(2)
        );
        let c = correlation_of_inverse(&make_toeplitz_precision(6, 0.5).unwrap()).unwrap();
        assert!(c.diag().iter().all(|&d| d == 1.0));
        assert!(c.min_eigenvalue().unwrap() > 0.0);
    }

    #[test]
    fn samplers_are_deterministic_and_seed_sensitive() {
        let s = make_toeplitz_precision(4, 0.3).unwrap();
        assert_eq!(sample_gaussian(10, &s, 9).unwrap(), sample_gaussian(10, &s, 9).unwrap());
        assert_ne!(
            sample_gaussian(10, &s, 9).unwrap(),
            sample_gaussian(10, &s, 10).unwrap()
        );
        assert_eq!(sample_mvt(10, &s, 3.5, 1).unwrap(), sample_mvt(10, &s, 3.5, 1).unwrap());
        assert_ne!(sample_mvt(10, &s, 3.5, 1).unwrap(), sample_mvt(10, &s, 3.5, 2).unwrap());
        let c = correlation_of_inverse(&s).unwrap();
        assert_eq!(
            sample_nonparanormal(10, &c, 0.05, 0.4, 4).unwrap(),
            sample_nonparanormal(10, &c, 0.05, 0.4, 4).unwrap()
        );
        let a = SymMatrix::identity(2);
        assert_eq!(
            sample_matrix_normal(3, &a, &s, 5).unwrap(),
            sample_matrix_normal(3, &a, &s, 5).unwrap()
        );
        assert_ne!(rng_for(1, 0).random::<u64>(), rng_for(1, 1).random::<u64>());
    }

    #[test]
    fn single_row_sample() {
        let d = sample_gaussian(1, &SymMatrix::identity(3), 0).unwrap();
        assert_eq!(d.n(), 1);
        assert!(d.values().is_finite());
    }

    #[test]
    fn gaussian_sample_covariance_near_identity() {
        let (n, p) = (2000, 5);
        let mut errs: Vec<f64> = (0..20)
            .map(|seed| {
                let d = sample_gaussian(n, &SymMatrix::identity(p), seed).unwrap();
                let s = sample_covariance(&d).unwrap().matrix;
                s.sub(&SymMatrix::identity(p)).unwrap().max_abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        assert!(errs[10] <= 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn mvt_rejects_small_nu() {
        assert_eq!(
            sample_mvt(5, &SymMatrix::identity(2), 2.0, 0).unwrap_err(),
            SimError::NuTooSmall(2.0)
        );
    }

    #[test]
    fn nonparanormal_requires_correlation() {
        let s = SymMatrix::from_diag(&[1.0, 2.0]);
        assert!(matches!(
            sample_nonparanormal(5, &s, 0.05, 0.4, 0),
            Err(SimError::NotCorrelation { index: 1, .. })
        ));
    }

    #[test]
    fn cdf_transform_mean_matches_closed_form() {
        // E Φ((Z − μ)/σ) = Φ(−μ / sqrt(1 + σ²))
        let t = CdfTransform::new(0.05, 0.4).unwrap();
        let exact = normal_cdf(-0.05 / (1.0f64 + 0.16).sqrt());
        assert!((t.mean - exact).abs() <= 1e-10);
    }

    #[test]
    fn cdf_transform_variance_matches_riemann_sum() {
        let t = CdfTransform::new(0.05, 0.4).unwrap();
        let h = 1e-4;
        let mut m2 = 0.0;
        let mut z = -12.0;
        while z < 12.0 {
            let mid = z + 0.5 * h;
            m2 += normal_cdf((mid - 0.05) / 0.4).powi(2) * normal_pdf(mid) * h;
            z += h;
        }
        let var = m2 - t.mean * t.mean;
        assert!((t.sd * t.sd - var).abs() <= 1e-8);
    }

    #[test]
    fn sparsity_examples() {
        let s = sparsity_summary(&SymMatrix::identity(6), 0.5).unwrap();
        assert_eq!(s.s_p, 1.0);
        assert_eq!(s.m_p, 1.0);

        let limit = toeplitz_sparsity_limit(0.5, 0.5);
        let expect = (1.0 + 0.5f64.sqrt()) / (1.0 - 0.5f64.sqrt());
        assert!((limit - expect).abs() < 1e-12);
        assert!((limit - 5.8284).abs() < 1e-4);

        let spec = TruthSpec {
            constructor: TruthConstructor::Toeplitz,
            rho: 0.5,
            p: 50,
        };
        let s = spec.sparsity_summary(0.5).unwrap();
        let middle: f64 = (0..50i32).map(|i| 0.5f64.powi((i - 25).abs()).sqrt()).sum();
        assert!((s.s_p - middle).abs() < 1e-12);
        assert!(s.s_p < s.s_p_limit.unwrap());

        // q = 0 counts nonzeros
        let s = sparsity_summary(&make_toeplitz_precision(7, 0.3).unwrap(), 0.0).unwrap();
        assert_eq!(s.s_p, 7.0);
    }
}
