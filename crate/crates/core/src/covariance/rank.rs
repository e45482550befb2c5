use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{psd_project, CovarianceError, CovarianceEstimate, CovarianceKind, DataMatrix, Result};
use crate::linalg::{Matrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    Spearman,
    Kendall,
}

/// 1-based ranks with ties assigned the average of the positions they span.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = 0.5 * ((start + 1) + end) as f64;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn check_nonconstant(data: &DataMatrix) -> Result<()> {
    for j in 0..data.p() {
        let c = data.column(j);
        if c.iter().all(|&v| v == c[0]) {
            return Err(CovarianceError::DegenerateColumn { column: j });
        }
    }
    Ok(())
}

fn spearman_raw(data: &DataMatrix) -> SymMatrix {
    let (n, p) = (data.n(), data.p());
    let centered: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let r = mid_ranks(&data.column(j));
            let mean = r.iter().sum::<f64>() / n as f64;
            r.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let rho: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let num: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            (num / (norms[i] * norms[j])).clamp(-1.0, 1.0)
        })
        .collect();
    assemble(p, &pairs, rho, |r| 2.0 * (PI / 6.0 * r).sin())
}

fn kendall_raw(data: &DataMatrix) -> SymMatrix {
    let (n, p) = (data.n(), data.p());
    // pairwise difference signs per column, k < k'
    let signs: Vec<Vec<i8>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let c = data.column(j);
            let mut s = Vec::with_capacity(n * (n - 1) / 2);
            for k in 0..n {
                for l in (k + 1)..n {
                    let d = c[k] - c[l];
                    s.push(if d > 0.0 {
                        1
                    } else if d < 0.0 {
                        -1
                    } else {
                        0
                    });
                }
            }
            s
        })
        .collect();
    let total = (n * (n - 1) / 2) as f64;
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let tau: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let concordance: i64 = signs[i].iter().zip(&signs[j]).map(|(&a, &b)| i64::from(a * b)).sum();
            concordance as f64 / total
        })
        .collect();
    assemble(p, &pairs, tau, |t| (PI / 2.0 * t).sin())
}

fn assemble(p: usize, pairs: &[(usize, usize)], values: Vec<f64>, map: impl Fn(f64) -> f64) -> SymMatrix {
    let mut m = Matrix::identity(p);
    for (&(i, j), v) in pairs.iter().zip(values) {
        m[(i, j)] = map(v);
    }
    SymMatrix::from_fn(p, |i, j| m[(i, j)])
}

/// Sine-transformed rank correlation matrix before projection; unit diagonal.
pub fn rank_correlation_raw(data: &DataMatrix, method: RankMethod) -> Result<SymMatrix> {
    data.require_samples(2)?;
    check_nonconstant(data)?;
    Ok(match method {
        RankMethod::Spearman => spearman_raw(data),
        RankMethod::Kendall => kendall_raw(data),
    })
}

/// Spearman or Kendall pilot projected onto `{Σ ⪰ εI}`.
pub fn rank_correlation_matrix(data: &DataMatrix, method: RankMethod, epsilon: f64) -> Result<CovarianceEstimate> {
    let raw = rank_correlation_raw(data, method)?;
    let matrix = psd_project(&raw, epsilon)?;
    Ok(CovarianceEstimate {
        matrix,
        kind: match method {
            RankMethod::Spearman => CovarianceKind::Spearman,
            RankMethod::Kendall => CovarianceKind::Kendall,
        },
        huber_h: None,
        projected: true,
        epsilon: Some(epsilon),
    })
}
