//! Column-wise ℓ1-penalized inverse estimation.
//!
//! Column `i` of the precision matrix is estimated as
//!
//! ```text
//! β̂_i = argmin_β  ½ βᵀ Σ̂ β − βᵢ + λ |β|₁
//! ```
//!
//! by cyclic coordinate descent with an active-set phase. Columns are solved
//! independently and then symmetrized by keeping, for each pair, the entry of
//! smaller magnitude. A converged solution satisfies the KKT conditions
//! `Σ̂β̂ − e_i + λ sgn(β̂) = 0`, which imply the Dantzig-type feasibility
//! `|Σ̂β̂ − e_i|_∞ ≤ λ`; both are checked before a column is declared converged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covariance::CovarianceEstimate;
use crate::linalg::{kronecker_capped, LinalgError, Matrix, SymMatrix, DEFAULT_KRONECKER_CAP};

/// Residual level at which a reported solution is considered certified.
pub const KKT_TOLERANCE: f64 = 1e-6;

const MIN_DIAGONAL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScioError {
    #[error("diagonal entry {index} of the covariance is {value}, coordinate update undefined")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("column index {index} out of range for dimension {dim}")]
    ColumnOutOfRange { index: usize, dim: usize },
    #[error("penalty must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("penalty grid must be nonempty, positive and strictly decreasing")]
    InvalidGrid,
    #[error("warm start has length {got}, expected {expected}")]
    WarmStartLength { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ScioError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Cap on coordinate sweeps (full and active-set sweeps both count).
    pub max_sweeps: usize,
    /// Relative coordinate-change tolerance.
    pub change_tol: f64,
    /// KKT violation tolerance required for convergence.
    pub kkt_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 10_000,
            change_tol: 1e-9,
            kkt_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSolution {
    pub index: usize,
    pub beta: Vec<f64>,
    pub lambda: f64,
    /// `max(dual_violation, stationarity_violation)`.
    pub kkt_residual: f64,
    /// `max(0, |Σ̂β̂ − e_i|_∞ − λ)`.
    pub dual_violation: f64,
    /// Largest `|(Σ̂β̂ − e_i)_j + λ sgn(β̂_j)|` over the support.
    pub stationarity_violation: f64,
    pub sweeps: usize,
    /// False when the sweep cap was hit; `beta` is then the last iterate.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub dual: f64,
    pub stationarity: f64,
}

/// KKT residuals of `beta` as a candidate for column `i` at penalty `lambda`.
pub fn kkt_residuals(sigma: &SymMatrix, i: usize, lambda: f64, beta: &[f64]) -> KktResiduals {
    let mut dual: f64 = 0.0;
    let mut stationarity: f64 = 0.0;
    for j in 0..sigma.dim() {
        let g = crate::linalg::dot(sigma.row(j), beta) - if j == i { 1.0 } else { 0.0 };
        dual = dual.max(g.abs() - lambda);
        if beta[j] != 0.0 {
            stationarity = stationarity.max((g + lambda * beta[j].signum()).abs());
        }
    }
    KktResiduals {
        dual: dual.max(0.0),
        stationarity,
    }
}

/// Value of `½ βᵀΣ̂β − β_i + λ|β|₁`.
pub fn column_objective(sigma: &SymMatrix, i: usize, lambda: f64, beta: &[f64]) -> f64 {
    let quad: f64 = (0..sigma.dim())
        .map(|j| beta[j] * crate::linalg::dot(sigma.row(j), beta))
        .sum();
    0.5 * quad - beta[i] + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_sigma(sigma: &SymMatrix) -> Result<()> {
    for (index, value) in sigma.diag().into_iter().enumerate() {
        if !(value > MIN_DIAGONAL) {
            return Err(ScioError::NonPositiveDiagonal { index, value });
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(ScioError::InvalidLambda(lambda))
    }
}

/// Coordinate-descent state for a single column.
struct ColumnState<'a> {
    sigma: &'a SymMatrix,
    index: usize,
    lambda: f64,
    beta: Vec<f64>,
    /// Σ̂β, maintained incrementally.
    grad: Vec<f64>,
}

impl<'a> ColumnState<'a> {
    fn new(sigma: &'a SymMatrix, index: usize, lambda: f64, beta: Vec<f64>) -> Self {
        let grad = sigma.matvec(&beta).expect("dimension checked");
        Self {
            sigma,
            index,
            lambda,
            beta,
            grad,
        }
    }

    fn update(&mut self, j: usize) -> f64 {
        let sjj = self.sigma[(j, j)];
        let old = self.beta[j];
        let target = if j == self.index { 1.0 } else { 0.0 };
        let z = target - (self.grad[j] - sjj * old);
        let new = soft_threshold(z, self.lambda) / sjj;
        let delta = new - old;
        if delta != 0.0 {
            self.beta[j] = new;
            for (g, s) in self.grad.iter_mut().zip(self.sigma.row(j)) {
                *g += delta * s;
            }
        }
        delta.abs()
    }

    fn sweep(&mut self, coords: impl Iterator<Item = usize>) -> f64 {
        coords.fold(0.0, |m, j| m.max(self.update(j)))
    }

    fn refresh_grad(&mut self) {
        self.grad = self.sigma.matvec(&self.beta).expect("dimension checked");
    }

    fn scale(&self) -> f64 {
        self.beta.iter().fold(1.0_f64, |m, b| m.max(b.abs()))
    }
}

/// Solves one column with default options.
pub fn scio_column(sigma: &SymMatrix, i: usize, lambda: f64, warm_start: Option<&[f64]>) -> Result<ColumnSolution> {
    scio_column_with(sigma, i, lambda, warm_start, &SolverOptions::default(), None)
}

/// Solves one column. When `trace` is given, the objective value after every
/// sweep is appended to it.
pub fn scio_column_with(
    sigma: &SymMatrix,
    i: usize,
    lambda: f64,
    warm_start: Option<&[f64]>,
    opts: &SolverOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<ColumnSolution> {
    let p = sigma.dim();
    if i >= p {
        return Err(ScioError::ColumnOutOfRange { index: i, dim: p });
    }
    check_lambda(lambda)?;
    check_sigma(sigma)?;
    let beta0 = match warm_start {
        Some(w) if w.len() != p => {
            return Err(ScioError::WarmStartLength {
                expected: p,
                got: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => vec![0.0; p],
    };

    let mut state = ColumnState::new(sigma, i, lambda, beta0);
    let mut sweeps = 0;
    let record = |state: &ColumnState<'_>, trace: &mut Option<&mut Vec<f64>>| {
        if let Some(t) = trace.as_deref_mut() {
            t.push(column_objective(sigma, i, lambda, &state.beta));
        }
    };

    let converged = loop {
        if sweeps >= opts.max_sweeps {
            break false;
        }
        let change = state.sweep(0..p);
        sweeps += 1;
        record(&state, &mut trace);

        if change <= opts.change_tol * state.scale() {
            state.refresh_grad();
            let kkt = kkt_residuals(sigma, i, lambda, &state.beta);
            if kkt.dual.max(kkt.stationarity) <= opts.kkt_tol {
                break true;
            }
        }

        // active-set phase
        let active: Vec<usize> = (0..p).filter(|&j| state.beta[j] != 0.0).collect();
        while sweeps < opts.max_sweeps && !active.is_empty() {
            let change = state.sweep(active.iter().copied());
            sweeps += 1;
            record(&state, &mut trace);
            if change <= opts.change_tol * state.scale() {
                break;
            }
        }
        state.refresh_grad();
    };

    let kkt = kkt_residuals(sigma, i, lambda, &state.beta);
    Ok(ColumnSolution {
        index: i,
        beta: state.beta,
        lambda,
        kkt_residual: kkt.dual.max(kkt.stationarity),
        dual_violation: kkt.dual,
        stationarity_violation: kkt.stationarity,
        sweeps,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub columns: Vec<ColumnSolution>,
    pub omega_tilde: SymMatrix,
    pub lambda: f64,
}

impl PrecisionEstimate {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn converged(&self) -> bool {
        self.columns.iter().all(|c| c.converged)
    }

    pub fn max_kkt_residual(&self) -> f64 {
        self.columns.iter().fold(0.0, |m, c| m.max(c.kkt_residual))
    }

    pub fn total_sweeps(&self) -> usize {
        self.columns.iter().map(|c| c.sweeps).sum()
    }

    /// Unsymmetrized estimate with column `j` equal to `β̂_j`.
    pub fn omega_hat(&self) -> Matrix {
        let p = self.dim();
        Matrix::from_fn(p, p, |i, j| self.columns[j].beta[i])
    }
}

/// Symmetrization keeping the smaller-magnitude entry of each pair.
///
/// `columns[j][i]` is entry `i` of column `j`. Ties keep `columns[j][i]` for
/// `i < j`.
pub fn symmetrize_min_magnitude(columns: &[Vec<f64>]) -> SymMatrix {
    let p = columns.len();
    let mut m = Matrix::zeros(p, p);
    for j in 0..p {
        for i in 0..=j {
            let b_ij = columns[j][i];
            let b_ji = columns[i][j];
            let v = if b_ij.abs() <= b_ji.abs() { b_ij } else { b_ji };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMatrix::try_from(m).expect("constructed symmetric")
}

pub fn scio_estimate(sigma: &SymMatrix, lambda: f64, warm: Option<&PrecisionEstimate>) -> Result<PrecisionEstimate> {
    scio_estimate_with(sigma, lambda, warm, &SolverOptions::default())
}

pub fn scio_estimate_with(
    sigma: &SymMatrix,
    lambda: f64,
    warm: Option<&PrecisionEstimate>,
    opts: &SolverOptions,
) -> Result<PrecisionEstimate> {
    let p = sigma.dim();
    check_lambda(lambda)?;
    check_sigma(sigma)?;
    if let Some(w) = warm {
        if w.dim() != p {
            return Err(ScioError::WarmStartLength {
                expected: p,
                got: w.dim(),
            });
        }
    }
    let columns = (0..p)
        .into_par_iter()
        .map(|i| {
            let start = warm.map(|w| w.columns[i].beta.as_slice());
            scio_column_with(sigma, i, lambda, start, opts, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let betas: Vec<Vec<f64>> = columns.iter().map(|c| c.beta.clone()).collect();
    Ok(PrecisionEstimate {
        omega_tilde: symmetrize_min_magnitude(&betas),
        columns,
        lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub grid: Vec<f64>,
    pub estimates: Vec<PrecisionEstimate>,
}

/// `count` log-spaced penalties from `max` down `decades` orders of magnitude.
pub fn log_grid(max: f64, count: usize, decades: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![max],
        _ => (0..count)
            .map(|k| max * 10f64.powf(-decades * k as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// The default grid: 30 points from 1 down two decades.
pub fn default_grid() -> Vec<f64> {
    log_grid(1.0, 30, 2.0)
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    let ok = !grid.is_empty() && grid.iter().all(|&l| l > 0.0 && l.is_finite()) && grid.windows(2).all(|w| w[0] > w[1]);
    if ok {
        Ok(())
    } else {
        Err(ScioError::InvalidGrid)
    }
}

/// Solves along a strictly decreasing grid, warm-starting each point from the
/// previous one.
pub fn scio_path(sigma: &SymMatrix, grid: &[f64]) -> Result<LambdaPath> {
    scio_path_with(sigma, grid, &SolverOptions::default())
}

pub fn scio_path_with(sigma: &SymMatrix, grid: &[f64], opts: &SolverOptions) -> Result<LambdaPath> {
    validate_grid(grid)?;
    let mut estimates: Vec<PrecisionEstimate> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let est = scio_estimate_with(sigma, lambda, estimates.last(), opts)?;
        estimates.push(est);
    }
    Ok(LambdaPath {
        grid: grid.to_vec(),
        estimates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnKkt {
    pub index: usize,
    pub dual_violation: f64,
    pub stationarity_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub columns: Vec<ColumnKkt>,
    pub max_dual_violation: f64,
    pub max_stationarity_violation: f64,
    /// Columns whose residuals exceed [`KKT_TOLERANCE`].
    pub flagged: Vec<usize>,
}

impl KktReport {
    pub fn certified(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Recomputes the KKT residuals of every column from scratch.
pub fn kkt_report(sigma: &SymMatrix, est: &PrecisionEstimate) -> Result<KktReport> {
    if sigma.dim() != est.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "covariance of dim {} vs estimate of dim {}",
            sigma.dim(),
            est.dim()
        ))
        .into());
    }
    let columns: Vec<ColumnKkt> = est
        .columns
        .iter()
        .map(|c| {
            let r = kkt_residuals(sigma, c.index, c.lambda, &c.beta);
            ColumnKkt {
                index: c.index,
                dual_violation: r.dual,
                stationarity_violation: r.stationarity,
            }
        })
        .collect();
    let flagged = columns
        .iter()
        .filter(|c| c.dual_violation.max(c.stationarity_violation) > KKT_TOLERANCE)
        .map(|c| c.index)
        .collect();
    Ok(KktReport {
        max_dual_violation: columns.iter().fold(0.0, |m, c| m.max(c.dual_violation)),
        max_stationarity_violation: columns.iter().fold(0.0, |m, c| m.max(c.stationarity_violation)),
        columns,
        flagged,
    })
}

/// Kronecker-structured precision estimate `Ω̃_A ⊗ Ω̃_B`, kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct GeminiPrecision {
    pub omega_a: PrecisionEstimate,
    pub omega_b: PrecisionEstimate,
    /// Present when the product dimension fits under the assembly cap.
    pub assembled: Option<Matrix>,
}

impl GeminiPrecision {
    pub fn dim(&self) -> usize {
        self.omega_a.dim() * self.omega_b.dim()
    }

    /// Entry `(r, c)` of `Ω̃_A ⊗ Ω̃_B` from the factors.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let f = self.omega_b.dim();
        self.omega_a.omega_tilde[(r / f, c / f)] * self.omega_b.omega_tilde[(r % f, c % f)]
    }

    /// `(Ω̃_A ⊗ Ω̃_B) x` through `vec(Ω̃_B X Ω̃_Aᵀ)` with `x = vec(X)` column-stacked.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (m, f) = (self.omega_a.dim(), self.omega_b.dim());
        if x.len() != m * f {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector of length {} for Kronecker dimension {}",
                x.len(),
                m * f
            ))
            .into());
        }
        // X is f×m with column k = x[k*f..(k+1)*f]
        let xm = Matrix::from_fn(f, m, |i, k| x[k * f + i]);
        let y = self
            .omega_b
            .omega_tilde
            .as_matrix()
            .matmul(&xm)?
            .matmul(self.omega_a.omega_tilde.as_matrix())?;
        let mut out = Vec::with_capacity(m * f);
        for k in 0..m {
            for i in 0..f {
                out.push(y[(i, k)]);
            }
        }
        Ok(out)
    }

    pub fn assemble(&self, cap: usize) -> Result<Matrix> {
        Ok(kronecker_capped(
            self.omega_a.omega_tilde.as_matrix(),
            self.omega_b.omega_tilde.as_matrix(),
            cap,
        )?)
    }
}

/// Runs the column solver on each Gemini factor.
pub fn gemini_precision(
    sigma_a: &CovarianceEstimate,
    sigma_b: &CovarianceEstimate,
    lambda_a: f64,
    lambda_b: f64,
) -> Result<GeminiPrecision> {
    let omega_a = scio_estimate(&sigma_a.matrix, lambda_a, None)?;
    let omega_b = scio_estimate(&sigma_b.matrix, lambda_b, None)?;
    let mut est = GeminiPrecision {
        omega_a,
        omega_b,
        assembled: None,
    };
    if est.dim() <= DEFAULT_KRONECKER_CAP {
        est.assembled = Some(est.assemble(DEFAULT_KRONECKER_CAP)?);
    }
    Ok(est)
}

/// Penalty `C · M · sqrt(log(max(m, f)) / (other · n))` for one Kronecker factor.
pub fn gemini_lambda(constant: f64, l1_norm: f64, m: usize, f: usize, other_dim: usize, n: usize) -> f64 {
    let big = m.max(f).max(2) as f64;
    constant * l1_norm * (big.ln() / (other_dim as f64 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceKind;

    fn assert_certified(sigma: &SymMatrix, sol: &ColumnSolution) {
        let r = kkt_residuals(sigma, sol.index, sol.lambda, &sol.beta);
        assert!(sol.converged);
        assert!(r.dual <= KKT_TOLERANCE, "dual {}", r.dual);
        assert!(r.stationarity <= KKT_TOLERANCE, "stationarity {}", r.stationarity);
    }

    /// Proximal gradient with a fixed step, run long enough to be exact.
    fn ista(sigma: &SymMatrix, i: usize, lambda: f64, iters: usize) -> Vec<f64> {
        let p = sigma.dim();
        let step = 1.0 / crate::linalg::sym_norm(sigma, crate::linalg::NormKind::Spectral).unwrap();
        let mut beta = vec![0.0; p];
        for _ in 0..iters {
            let g = sigma.matvec(&beta).unwrap();
            for j in 0..p {
                let e = if j == i { 1.0 } else { 0.0 };
                beta[j] = soft_threshold(beta[j] - step * (g[j] - e), step * lambda);
            }
        }
        beta
    }

    #[test]
    fn identity_soft_threshold() {
        let s = SymMatrix::identity(4);
        let sol = scio_column(&s, 0, 0.2, None).unwrap();
        assert!((sol.beta[0] - 0.8).abs() < 1e-15);
        assert!(sol.beta[1..].iter().all(|&b| b == 0.0));
        assert_certified(&s, &sol);

        let sol = scio_column(&s, 0, 1.0, None).unwrap();
        assert!(sol.beta.iter().all(|&b| b == 0.0));
        let sol = scio_column(&s, 2, 3.0, None).unwrap();
        assert!(sol.beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn two_by_two_closed_form() {
        let s = SymMatrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let sol = scio_column(&s, 0, 0.1, None).unwrap();
        assert!((sol.beta[0] - 17.0 / 15.0).abs() < 1e-8);
        assert!((sol.beta[1] + 7.0 / 15.0).abs() < 1e-8);
        let oracle = ista(&s, 0, 0.1, 20_000);
        assert!((oracle[0] - 17.0 / 15.0).abs() < 1e-10);
        assert!((oracle[1] + 7.0 / 15.0).abs() < 1e-10);
        // residuals are exactly -λ and +λ at the solution
        let g = s.matvec(&sol.beta).unwrap();
        assert!((g[0] - 1.0 + 0.1).abs() < 1e-10);
        assert!((g[1] - 0.1).abs() < 1e-10);
    }

    #[test]
    fn symmetrization_rule() {
        // β̂_12 = 0.3 (entry 0 of column 1), β̂_21 = -0.2 (entry 1 of column 0)
        let columns = vec![vec![1.0, -0.2], vec![0.3, 1.0]];
        let m = symmetrize_min_magnitude(&columns);
        assert_eq!(m[(0, 1)], -0.2);
        assert_eq!(m[(1, 0)], -0.2);

        // tie keeps entry i of column j
        let columns = vec![vec![1.0, -0.4], vec![0.4, 1.0]];
        assert_eq!(symmetrize_min_magnitude(&columns)[(0, 1)], 0.4);
    }

    #[test]
    fn diagonal_covariance_separable() {
        let s = SymMatrix::from_diag(&[2.0, 1.0]);
        let est = scio_estimate(&s, 0.1, None).unwrap();
        assert!((est.columns[0].beta[0] - 0.45).abs() < 1e-15);
        assert_eq!(est.columns[0].beta[1], 0.0);
        assert!(
            est.omega_tilde
                .sub(&SymMatrix::from_diag(&[0.45, 0.9]))
                .unwrap()
                .max_abs()
                < 1e-15
        );
    }

    #[test]
    fn path_examples() {
        let s = SymMatrix::from_fn(5, |i, j| if i == j { 1.0 } else { 0.3 });
        let path = scio_path(&s, &[1e6]).unwrap();
        assert_eq!(path.estimates[0].omega_tilde, SymMatrix::zeros(5));

        let path = scio_path(&SymMatrix::identity(3), &[0.5, 0.2]).unwrap();
        assert!(
            path.estimates[0]
                .omega_tilde
                .sub(&SymMatrix::identity(3).scale(0.5))
                .unwrap()
                .max_abs()
                < 1e-15
        );
        assert!(
            path.estimates[1]
                .omega_tilde
                .sub(&SymMatrix::identity(3).scale(0.8))
                .unwrap()
                .max_abs()
                < 1e-15
        );

        assert_eq!(scio_path(&s, &[0.1, 0.2]).unwrap_err(), ScioError::InvalidGrid);
        assert_eq!(scio_path(&s, &[]).unwrap_err(), ScioError::InvalidGrid);
    }

    #[test]
    fn kkt_report_flags_perturbation() {
        let s = SymMatrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let mut est = scio_estimate(&s, 0.1, None).unwrap();
        let clean = kkt_report(&s, &est).unwrap();
        assert!(clean.certified());
        assert!(clean.max_dual_violation <= 1e-10 && clean.max_stationarity_violation <= 1e-10);

        est.columns[0].beta[1] += 0.1;
        let r = kkt_report(&s, &est).unwrap();
        assert_eq!(r.flagged, vec![0]);
        // the gradient moves by 0.1 · Σ̂[:,1] = (0.05, 0.1)
        assert!((r.columns[0].stationarity_violation - 0.1).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_diagonal_rejected() {
        let s = SymMatrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(
            scio_column(&s, 0, 0.1, None),
            Err(ScioError::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn sweep_cap_returns_flagged_iterate() {
        let s = SymMatrix::from_fn(6, |i, j| 0.9f64.powi((i as i32 - j as i32).abs()));
        let opts = SolverOptions {
            max_sweeps: 1,
            ..SolverOptions::default()
        };
        let sol = scio_column_with(&s, 2, 0.01, None, &opts, None).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.sweeps, 1);
    }

    #[test]
    fn objective_non_increasing_across_sweeps() {
        let s = SymMatrix::from_fn(8, |i, j| 0.6f64.powi((i as i32 - j as i32).abs()));
        let mut trace = Vec::new();
        let sol = scio_column_with(&s, 3, 0.05, None, &SolverOptions::default(), Some(&mut trace)).unwrap();
        assert!(sol.converged);
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-14));
    }

    #[test]
    fn gemini_identity_factors() {
        let wrap = |m: SymMatrix, kind| CovarianceEstimate {
            matrix: m,
            kind,
            huber_h: None,
            projected: false,
            epsilon: None,
        };
        let a = wrap(SymMatrix::identity(3), CovarianceKind::GeminiA);
        let b = wrap(SymMatrix::identity(2), CovarianceKind::GeminiB);
        let g = gemini_precision(&a, &b, 0.1, 0.2).unwrap();
        let k = g.assembled.as_ref().unwrap();
        assert!(k.sub(&Matrix::identity(6).scale(0.9 * 0.8)).unwrap().max_abs() < 1e-14);

        let g = gemini_precision(&a, &b, 1e6, 0.2).unwrap();
        assert_eq!(g.omega_a.omega_tilde, SymMatrix::zeros(3));
        assert_eq!(g.assembled.unwrap().max_abs(), 0.0);
    }
}
