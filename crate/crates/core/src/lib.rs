//! Precision matrix estimation under weak (ℓq) sparsity.
//!
//! The crate is organized around a column-wise ℓ1-penalized quadratic solver
//! ([`scio`]) fed by one of several pilot covariance estimators
//! ([`covariance`]): the sample covariance, a Huber-type robust estimator,
//! Spearman/Kendall rank correlations, and Gemini factors for matrix-variate
//! data. [`simulate`] builds ground truths and synthetic data, and [`theory`]
//! measures errors and checks the deterministic error bounds.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod linalg;
pub mod scio;
pub mod simulate;
pub mod theory;

pub use covariance::{CovarianceEstimate, CovarianceKind, DataMatrix};
pub use linalg::{Matrix, NormKind, SymMatrix};
pub use scio::{LambdaPath, PrecisionEstimate};
