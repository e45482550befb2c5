//! Sup-norm projection onto the cone `{Σ ⪰ εI}`.
//!
//! Solves `min ‖Σ − S̃‖_∞ s.t. Σ ⪰ εI` by ADMM on the splitting `Σ = Z`:
//!
//! ```text
//! Σ ← S̃ + prox_{‖·‖∞/ρ}(Z − U − S̃)
//! Z ← clip_ε(Σ + U)
//! U ← U + Σ − Z
//! ```
//!
//! The sup-norm prox is evaluated through the Moreau identity as the residual
//! of a Euclidean projection onto an ℓ1 ball; the `Z` step clips eigenvalues
//! from below at `ε`. Every `Z` iterate is feasible, and the best one seen is
//! returned.
//!
//! `ρ` starts at `AdmmOptions::rho` and is rebalanced every few iterations when
//! one residual dominates the other by more than a factor of 10.
//!
//! Iteration stops when both residuals are small or when the best objective is
//! within tolerance of a weak-duality lower bound built from `U`.

use super::{CovarianceError, Result};
use crate::linalg::{sym_eigen, sym_eigen_in_basis, Matrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    pub rho: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Rebalance `ρ` from the residual ratio; `false` keeps it fixed.
    pub adaptive_rho: bool,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            max_iter: 10_000,
            adaptive_rho: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: SymMatrix,
    /// `‖matrix − S̃‖_∞`.
    pub objective: f64,
    pub iterations: usize,
    /// True when the input already met the eigenvalue floor.
    pub unchanged: bool,
}

/// Euclidean projection of `v` onto `{w : |w|₁ ≤ radius}` (sort-based).
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - radius) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

/// `V diag(max(λ, ε)) Vᵀ`, the Frobenius projection onto `{Σ ⪰ εI}`.
pub fn clip_eigenvalues(s: &SymMatrix, epsilon: f64) -> Result<SymMatrix> {
    Ok(sym_eigen(s)?.reconstruct_with(|v| v.max(epsilon)))
}

fn sup_distance(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.as_matrix()
        .as_slice()
        .iter()
        .zip(b.as_matrix().as_slice())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Weak-duality lower bound on the optimal objective: any `W ⪰ 0` with
/// `Σ|W_ij| ≤ 1` gives `ε tr W − ⟨W, S̃⟩`. `W` is built from the scaled
/// multiplier `−ρU`.
fn dual_bound(u: &[f64], rho: f64, s_tilde: &SymMatrix, epsilon: f64) -> Result<f64> {
    let p = s_tilde.dim();
    let w = SymMatrix::symmetrize(&Matrix::from_vec(p, p, u.iter().map(|v| -rho * v).collect()))?;
    let w = sym_eigen(&w)?.reconstruct_with(|v| v.max(0.0));
    let l1: f64 = w.as_matrix().as_slice().iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return Ok(0.0);
    }
    let scale = 1.0 / l1.max(1.0);
    let trace: f64 = w.diag().iter().sum();
    let inner: f64 = w
        .as_matrix()
        .as_slice()
        .iter()
        .zip(s_tilde.as_matrix().as_slice())
        .map(|(a, b)| a * b)
        .sum();
    Ok((scale * (epsilon * trace - inner)).max(0.0))
}

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn psd_project(s_tilde: &SymMatrix, epsilon: f64) -> Result<SymMatrix> {
    psd_project_with(s_tilde, epsilon, &AdmmOptions::default()).map(|p| p.matrix)
}

pub fn psd_project_with(s_tilde: &SymMatrix, epsilon: f64, opts: &AdmmOptions) -> Result<Projection> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(CovarianceError::InvalidParameter(format!(
            "projection floor must be positive, got {epsilon}"
        )));
    }
    let p = s_tilde.dim();
    let eig = sym_eigen(s_tilde)?;
    if eig.values[0] >= epsilon {
        return Ok(Projection {
            matrix: s_tilde.clone(),
            objective: 0.0,
            iterations: 0,
            unchanged: true,
        });
    }

    let mut rho = opts.rho;
    let s = s_tilde.as_matrix().as_slice();
    let mut basis = eig.vectors.clone();
    let mut z = eig.reconstruct_with(|v| v.max(epsilon));
    let mut best = (sup_distance(&z, s_tilde), z.clone());
    let mut u = vec![0.0; p * p];
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut lower: f64 = 0.0;

    for iter in 1..=opts.max_iter {
        // Σ-step
        let zs = z.as_matrix().as_slice();
        let w: Vec<f64> = (0..p * p).map(|k| zs[k] - u[k] - s[k]).collect();
        let shrink = project_l1_ball(&w, 1.0 / rho);
        let sigma: Vec<f64> = (0..p * p).map(|k| s[k] + w[k] - shrink[k]).collect();

        // Z-step
        let target = SymMatrix::symmetrize(&Matrix::from_vec(p, p, (0..p * p).map(|k| sigma[k] + u[k]).collect()))?;
        let eig = sym_eigen_in_basis(&target, &basis)?;
        let z_new = eig.reconstruct_with(|v| v.max(epsilon));
        basis = eig.vectors;

        let zn = z_new.as_matrix().as_slice();
        let r: Vec<f64> = (0..p * p).map(|k| sigma[k] - zn[k]).collect();
        let dz: Vec<f64> = (0..p * p).map(|k| zn[k] - zs[k]).collect();
        primal = frobenius(&r);
        dual = rho * frobenius(&dz);
        for k in 0..p * p {
            u[k] += r[k];
        }

        let obj = sup_distance(&z_new, s_tilde);
        if obj < best.0 {
            best = (obj, z_new.clone());
        }
        z = z_new;

        if opts.adaptive_rho && iter % 10 == 0 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                // scaled dual variable
                u.iter_mut().for_each(|v| *v /= factor);
            }
        }

        let scale = p as f64;
        let eps_pri = scale * opts.abs_tol + opts.rel_tol * frobenius(&sigma).max(frobenius(z.as_matrix().as_slice()));
        let eps_dual = scale * opts.abs_tol + opts.rel_tol * rho * frobenius(&u);
        if iter % 10 == 0 {
            lower = lower.max(dual_bound(&u, rho, s_tilde, epsilon)?);
        }
        let gap_closed = best.0 - lower <= opts.abs_tol + opts.rel_tol * best.0;
        if (primal <= eps_pri && dual <= eps_dual) || gap_closed {
            return Ok(Projection {
                matrix: best.1,
                objective: best.0,
                iterations: iter,
                unchanged: false,
            });
        }
    }
    Err(CovarianceError::ConvergenceFailure {
        iterations: opts.max_iter,
        primal,
        dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn l1_ball_projection() {
        assert_eq!(project_l1_ball(&[0.1, -0.2], 1.0), vec![0.1, -0.2]);
        let w = project_l1_ball(&[3.0, -1.0, 0.5], 2.0);
        // θ = 1: (2, 0, 0)
        assert_eq!(w, vec![2.0, -0.0, 0.0]);
        let w = project_l1_ball(&[1.0, 1.0], 1.0);
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn feasible_input_unchanged() {
        let p = psd_project_with(&SymMatrix::identity(3), 0.01, &AdmmOptions::default()).unwrap();
        assert!(p.unchanged);
        assert_eq!(p.matrix, SymMatrix::identity(3));
    }

    #[test]
    fn two_by_two_closed_form() {
        let s = SymMatrix::from_rows(&[[1.0, 1.2], [1.2, 1.0]]).unwrap();
        let p = psd_project_with(&s, 0.01, &AdmmOptions::default()).unwrap();
        assert!((p.objective - 0.105).abs() <= 1e-4, "{}", p.objective);
        let expect = SymMatrix::from_rows(&[[1.105, 1.095], [1.095, 1.105]]).unwrap();
        assert!(p.matrix.sub(&expect).unwrap().max_abs() <= 1e-3);
        assert!(p.matrix.min_eigenvalue().unwrap() >= 0.01 - 1e-8);
    }

    #[test]
    fn dual_bound_never_exceeds_optimum() {
        // optimum 0.105 from the closed form above
        let s = SymMatrix::from_rows(&[[1.0, 1.2], [1.2, 1.0]]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..200 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rho = rng.random_range(0.1..10.0);
            assert!(dual_bound(&u, rho, &s, 0.01).unwrap() <= 0.105 + 1e-12);
        }
        // the optimal multiplier attains it
        let w = [-0.25, 0.25, 0.25, -0.25];
        assert!((dual_bound(&w, 1.0, &s, 0.01).unwrap() - 0.105).abs() < 1e-12);
    }

    #[test]
    fn one_by_one_clamp() {
        let p = psd_project_with(&SymMatrix::from_diag(&[-1.0]), 0.5, &AdmmOptions::default()).unwrap();
        assert!((p.matrix[(0, 0)] - 0.5).abs() < 1e-9);
        assert!((p.objective - 1.5).abs() < 1e-9);
    }

    #[test]
    fn never_worse_than_eigenvalue_clip() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for _ in 0..10 {
            let n = rng.random_range(2..10);
            let s = SymMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { rng.random_range(-0.9..0.9) });
            let eps = 1e-3;
            let p = psd_project_with(&s, eps, &AdmmOptions::default()).unwrap();
            let clip = clip_eigenvalues(&s, eps).unwrap();
            assert!(p.objective <= sup_distance(&clip, &s) + 1e-6);
            assert!(p.matrix.min_eigenvalue().unwrap() >= eps - 1e-8);
        }
    }

    #[test]
    fn rejects_nonpositive_floor() {
        assert!(psd_project(&SymMatrix::identity(2), 0.0).is_err());
    }
}
