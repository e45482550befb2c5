//! Dense linear-algebra kernels shared by every estimator.
//!
//! Matrices are small enough (a few hundred rows at most) that plain row-major
//! storage and textbook algorithms are adequate. The symmetric eigensolver is a
//! cyclic Jacobi iteration, which is deterministic and accurate to working
//! precision on symmetric input.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest Kronecker product dimension assembled unless the caller raises it.
pub const DEFAULT_KRONECKER_CAP: usize = 10_000;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    ConvergenceFailure { sweeps: usize, off_norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Kronecker product dimension {dim} exceeds cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix must have at least one row and column")]
    Empty,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k / self.cols, k % self.cols))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense symmetric matrix with both triangles stored.
///
/// Every constructor guarantees `m[(i, j)] == m[(j, i)]` bit-for-bit and that
/// all entries are finite.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim, dim))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self(m)
    }

    /// Evaluates `f` on the lower triangle (`i >= j`) and mirrors it.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    /// Mirrors the lower triangle of a square matrix into the upper triangle.
    pub fn from_lower(m: &Matrix) -> Result<Self> {
        check_square_finite(m)?;
        Ok(Self::from_fn(m.rows(), |i, j| m[(i, j)]))
    }

    /// Symmetrizes by averaging `(m + mᵀ) / 2`.
    pub fn symmetrize(m: &Matrix) -> Result<Self> {
        check_square_finite(m)?;
        Ok(Self::from_fn(m.rows(), |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)])
            }
        }))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::try_from(Matrix::from_rows(rows))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Row `i`, which by symmetry is also column `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self[(i, i)]).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.matvec(x)
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(self.0.scale(s))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.0.sub(&other.0).map(SymMatrix)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.0.add(&other.0).map(SymMatrix)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(sym_eigen(self)?.values[0])
    }
}

impl TryFrom<Matrix> for SymMatrix {
    type Error = LinalgError;

    /// Accepts only exactly symmetric, finite, square input.
    fn try_from(m: Matrix) -> Result<Self> {
        check_square_finite(&m)?;
        for i in 0..m.rows {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }
}

impl From<SymMatrix> for Matrix {
    fn from(s: SymMatrix) -> Matrix {
        s.0
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{:?}", self.0)
    }
}

fn check_square_finite(m: &Matrix) -> Result<()> {
    if m.rows == 0 || m.cols == 0 {
        return Err(LinalgError::Empty);
    }
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    if let Some((row, col)) = m.first_non_finite() {
        return Err(LinalgError::NonFinite { row, col });
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = S`.
pub fn cholesky(s: &SymMatrix) -> Result<Matrix> {
    let n = s.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut v = y[i];
        for k in 0..i {
            v -= l[(i, k)] * y[k];
        }
        y[i] = v / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[(k, i)] * y[k];
        }
        y[i] = v / l[(i, i)];
    }
    y
}

/// Inverse of a symmetric positive definite matrix, symmetrized on output.
pub fn invert_spd(s: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky(s)?;
    let n = s.dim();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(&l, &e);
        for (i, v) in col.into_iter().enumerate() {
            inv[(i, j)] = v;
        }
    }
    SymMatrix::symmetrize(&inv)
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomp {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let v = &self.vectors;
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| v[(i, k)] * mapped[k] * v[(j, k)]).sum())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|v| v)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eigen(s: &SymMatrix) -> Result<EigenDecomp> {
    let n = s.dim();
    let mut a = s.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let scale = frobenius(&a).max(1.0);
    let tol = JACOBI_OFF_TOL * scale;

    let off_norm = |a: &Matrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..i {
                acc += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off > tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::ConvergenceFailure { sweeps, off_norm: off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        off = off_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(EigenDecomp { values, vectors })
}

/// Eigendecomposition that first rotates `s` into an orthonormal `basis`.
///
/// When `basis` nearly diagonalizes `s` (as in iterative schemes whose
/// iterates drift slowly) the Jacobi stage needs only a sweep or two.
pub fn sym_eigen_in_basis(s: &SymMatrix, basis: &Matrix) -> Result<EigenDecomp> {
    if basis.rows() != s.dim() || !basis.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "basis {}x{} for matrix of dim {}",
            basis.rows(),
            basis.cols(),
            s.dim()
        )));
    }
    let rotated = basis.transpose().matmul(&s.as_matrix().matmul(basis)?)?;
    let inner = sym_eigen(&SymMatrix::symmetrize(&rotated)?)?;
    Ok(EigenDecomp {
        values: inner.values,
        vectors: basis.matmul(&inner.vectors)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Largest absolute entry.
    ElementwiseInf,
    /// Largest absolute column sum.
    L1,
    /// Largest singular value.
    Spectral,
    Frobenius,
    /// Squared Frobenius norm divided by the row count.
    ScaledFrobenius,
}

impl NormKind {
    pub const ALL: [NormKind; 5] = [
        NormKind::ElementwiseInf,
        NormKind::L1,
        NormKind::Spectral,
        NormKind::Frobenius,
        NormKind::ScaledFrobenius,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::ElementwiseInf => "elementwise_inf",
            NormKind::L1 => "l1",
            NormKind::Spectral => "spectral",
            NormKind::Frobenius => "frobenius",
            NormKind::ScaledFrobenius => "scaled_frobenius",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        NormKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown norm kind `{s}`"))
    }
}

fn frobenius(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn is_exactly_symmetric(a: &Matrix) -> bool {
    a.is_square() && (0..a.rows()).all(|i| (0..i).all(|j| a[(i, j)] == a[(j, i)]))
}

/// Matrix norm of a general (not necessarily symmetric) matrix.
///
/// Symmetric input takes the spectral norm as the largest absolute eigenvalue;
/// anything else goes through the eigenvalues of `AᵀA`.
pub fn matrix_norm(a: &Matrix, kind: NormKind) -> Result<f64> {
    if let Some((row, col)) = a.first_non_finite() {
        return Err(LinalgError::NonFinite { row, col });
    }
    Ok(match kind {
        NormKind::ElementwiseInf => a.max_abs(),
        NormKind::L1 => (0..a.cols())
            .map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Frobenius => frobenius(a),
        NormKind::ScaledFrobenius => {
            let f = frobenius(a);
            if a.rows() == 0 {
                0.0
            } else {
                f * f / a.rows() as f64
            }
        }
        NormKind::Spectral => {
            if a.rows() == 0 || a.cols() == 0 {
                0.0
            } else if is_exactly_symmetric(a) {
                let e = sym_eigen(&SymMatrix(a.clone()))?;
                e.values.iter().fold(0.0, |m, v| m.max(v.abs()))
            } else {
                let ata = SymMatrix::symmetrize(&a.transpose().matmul(a)?)?;
                let e = sym_eigen(&ata)?;
                e.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
            }
        }
    })
}

pub fn sym_norm(a: &SymMatrix, kind: NormKind) -> Result<f64> {
    matrix_norm(a.as_matrix(), kind)
}

/// Kronecker product with the default dimension cap.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    kronecker_capped(a, b, DEFAULT_KRONECKER_CAP)
}

pub fn kronecker_capped(a: &Matrix, b: &Matrix, cap: usize) -> Result<Matrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    let dim = rows.max(cols);
    if dim > cap {
        return Err(LinalgError::DimensionOverflow { dim, cap });
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows(), j / b.cols())] * b[(i % b.rows(), j % b.cols())]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        SymMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let gg = g.matmul(&g.transpose()).unwrap();
        SymMatrix::from_fn(n, |i, j| gg[(i, j)] + if i == j { 0.5 } else { 0.0 })
    }

    fn toeplitz(p: usize, rho: f64) -> SymMatrix {
        SymMatrix::from_fn(p, |i, j| rho.powi((i as i32 - j as i32).abs()))
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        assert_eq!(l, Matrix::identity(3));

        let s = SymMatrix::from_rows(&[[4.0, 2.0], [2.0, 5.0]]).unwrap();
        let l = cholesky(&s).unwrap();
        assert_eq!(l, Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]));

        let bad = SymMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&bad),
            Err(LinalgError::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn cholesky_recomposes() {
        let s = random_spd(8, 3);
        let l = cholesky(&s).unwrap();
        let llt = l.matmul(&l.transpose()).unwrap();
        assert!(max_abs_diff(&llt, s.as_matrix()) <= 1e-12 * s.max_abs().max(1.0));
    }

    #[test]
    fn eigen_small_cases() {
        let e = sym_eigen(&SymMatrix::from_diag(&[2.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0]);

        let e = sym_eigen(&SymMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_recomposition_and_orthonormality() {
        for (n, seed) in [(5, 7), (12, 8), (30, 9)] {
            let s = random_sym(n, seed);
            let e = sym_eigen(&s).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let rec = e.reconstruct();
            let err = frobenius(&rec.as_matrix().sub(s.as_matrix()).unwrap()) / frobenius(s.as_matrix());
            assert!(err <= 1e-10, "n={n} relative error {err}");
            let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
            assert!(max_abs_diff(&vtv, &Matrix::identity(n)) <= 1e-10);
        }
    }

    #[test]
    fn norm_examples() {
        let d = Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]);
        assert_eq!(matrix_norm(&d, NormKind::Spectral).unwrap(), 2.0);
        let a = Matrix::from_rows(&[[1.0, -3.0], [2.0, 0.0]]);
        assert_eq!(matrix_norm(&a, NormKind::L1).unwrap(), 3.0);
        let b = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert_eq!(matrix_norm(&b, NormKind::ElementwiseInf).unwrap(), 2.0);
        let diag3 = SymMatrix::from_diag(&[3.0, 3.0, 3.0]);
        assert!((sym_norm(&diag3, NormKind::Frobenius).unwrap() - 27f64.sqrt()).abs() < 1e-14);
        assert!((sym_norm(&diag3, NormKind::ScaledFrobenius).unwrap() - 9.0).abs() < 1e-14);
    }

    #[test]
    fn nonsymmetric_spectral_norm() {
        // singular values of [[1,1],[0,1]] are golden-ratio related
        let a = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((matrix_norm(&a, NormKind::Spectral).unwrap() - phi).abs() < 1e-12);
    }

    #[test]
    fn kronecker_examples() {
        let k = kronecker(&Matrix::identity(2), &Matrix::identity(3)).unwrap();
        assert_eq!(k, Matrix::identity(6));

        let b = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let k = kronecker(&Matrix::from_rows(&[[2.0]]), &b).unwrap();
        assert_eq!(k, b.scale(2.0));

        let k = kronecker(
            &Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]),
            &Matrix::from_rows(&[[2.0]]),
        )
        .unwrap();
        assert_eq!(k, Matrix::from_rows(&[[2.0, 2.0], [0.0, 2.0]]));

        let err = kronecker_capped(&Matrix::identity(10), &Matrix::identity(10), 99).unwrap_err();
        assert_eq!(err, LinalgError::DimensionOverflow { dim: 100, cap: 99 });
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert_spd(&SymMatrix::identity(4)).unwrap(), SymMatrix::identity(4));
        let inv = invert_spd(&SymMatrix::from_diag(&[2.0, 4.0])).unwrap();
        assert!(max_abs_diff(inv.as_matrix(), SymMatrix::from_diag(&[0.5, 0.25]).as_matrix()) <= 1e-15);

        let t = toeplitz(6, 0.5);
        let inv = invert_spd(&t).unwrap();
        let prod = t.as_matrix().matmul(inv.as_matrix()).unwrap();
        assert!(max_abs_diff(&prod, &Matrix::identity(6)) <= 1e-8);
    }

    #[test]
    fn double_inverse_round_trip() {
        for seed in 0..5 {
            let s = random_spd(7, seed);
            let back = invert_spd(&invert_spd(&s).unwrap()).unwrap();
            assert!(max_abs_diff(back.as_matrix(), s.as_matrix()) <= 1e-6);
        }
    }

    #[test]
    fn spectral_below_l1_and_kronecker_multiplicative() {
        for seed in 0..10 {
            let a = random_sym(6, seed);
            let b = random_sym(4, seed + 100);
            let sa = sym_norm(&a, NormKind::Spectral).unwrap();
            let sb = sym_norm(&b, NormKind::Spectral).unwrap();
            assert!(sa <= sym_norm(&a, NormKind::L1).unwrap() + 1e-12);
            let k = kronecker(a.as_matrix(), b.as_matrix()).unwrap();
            let sk = matrix_norm(&k, NormKind::Spectral).unwrap();
            assert!((sk - sa * sb).abs() <= 1e-8 * sa * sb);
        }
    }

    #[test]
    fn symmetric_construction_rejects_asymmetry() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.5, 1.0]]);
        assert!(matches!(
            SymMatrix::try_from(m.clone()),
            Err(LinalgError::NotSymmetric { .. })
        ));
        let s = SymMatrix::from_lower(&m).unwrap();
        assert_eq!(s[(0, 1)], 2.5);
        let m = Matrix::from_rows(&[[f64::NAN]]);
        assert!(matches!(SymMatrix::try_from(m), Err(LinalgError::NonFinite { .. })));
    }
}
