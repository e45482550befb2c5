//! Pilot covariance estimators.
//!
//! Each estimator turns a data set into a [`CovarianceEstimate`] that the
//! column solver can consume. The robust and rank-based estimators are not
//! guaranteed to be positive semidefinite, so they finish with
//! [`psd_project`], a sup-norm projection onto `{Σ ⪰ εI}`.

mod gemini;
mod huber;
mod projection;
mod rank;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix, SymMatrix};

pub use gemini::gemini_covariances;
pub use huber::{huber_covariance, huber_location, huber_psi, huber_raw, huber_truncation};
pub use projection::{clip_eigenvalues, project_l1_ball, psd_project, psd_project_with, AdmmOptions, Projection};
pub use rank::{mid_ranks, rank_correlation_matrix, rank_correlation_raw, RankMethod};

/// Default eigenvalue floor for the positive-definite projection.
pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Default Huber truncation constant `K` in `H = K (n / log p)^{1/2}`.
pub const DEFAULT_HUBER_K: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovarianceError {
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("need at least {required} variables, got {got}")]
    TooFewVariables { required: usize, got: usize },
    #[error("column {column} is constant; its correlation is undefined")]
    DegenerateColumn { column: usize },
    #[error("{axis} {index} is identically zero across all samples")]
    DegenerateAxis { axis: &'static str, index: usize },
    #[error("samples have inconsistent shapes: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("projection did not converge within {iterations} iterations (primal {primal:e}, dual {dual:e})")]
    ConvergenceFailure { iterations: usize, primal: f64, dual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, CovarianceError>;

/// `n × p` data set; rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
}

impl DataMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 {
            return Err(CovarianceError::TooFewSamples { required: 1, got: 0 });
        }
        if values.cols() == 0 {
            return Err(CovarianceError::TooFewVariables { required: 1, got: 0 });
        }
        if !values.is_finite() {
            return Err(CovarianceError::InvalidParameter(
                "data contains non-finite values".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn p(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Applies `f` to every entry of column `j`.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = self.values.clone();
        for i in 0..values.rows() {
            values[(i, j)] = f(values[(i, j)]);
        }
        Self::new(values)
    }

    fn require_samples(&self, required: usize) -> Result<()> {
        if self.n() < required {
            return Err(CovarianceError::TooFewSamples {
                required,
                got: self.n(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Sample,
    Huber,
    Spearman,
    Kendall,
    GeminiA,
    GeminiB,
}

impl CovarianceKind {
    pub fn name(self) -> &'static str {
        match self {
            CovarianceKind::Sample => "sample",
            CovarianceKind::Huber => "huber",
            CovarianceKind::Spearman => "spearman",
            CovarianceKind::Kendall => "kendall",
            CovarianceKind::GeminiA => "gemini_a",
            CovarianceKind::GeminiB => "gemini_b",
        }
    }
}

/// A pilot covariance matrix plus how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub matrix: SymMatrix,
    pub kind: CovarianceKind,
    pub huber_h: Option<f64>,
    pub projected: bool,
    pub epsilon: Option<f64>,
}

/// Mean-centered sample covariance with `1/n` normalization.
pub fn sample_covariance(data: &DataMatrix) -> Result<CovarianceEstimate> {
    data.require_samples(2)?;
    let (n, p) = (data.n(), data.p());
    let x = data.values();
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = Matrix::from_fn(n, p, |i, j| x[(i, j)] - mean[j]);
    let matrix = SymMatrix::from_fn(p, |a, b| {
        (0..n).map(|k| centered[(k, a)] * centered[(k, b)]).sum::<f64>() / n as f64
    });
    Ok(CovarianceEstimate {
        matrix,
        kind: CovarianceKind::Sample,
        huber_h: None,
        projected: false,
        epsilon: None,
    })
}
