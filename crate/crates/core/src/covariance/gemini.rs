use super::{CovarianceError, CovarianceEstimate, CovarianceKind, Result};
use crate::linalg::{Matrix, SymMatrix};

/// Gemini pilots for matrix-variate samples `X(t)` of shape `f × m`.
///
/// The column factor `A` (`m × m`) comes from normalized inner products of
/// columns summed over samples, and the row factor `B` (`f × f`) likewise from
/// rows. No centering is applied.
pub fn gemini_covariances(samples: &[Matrix]) -> Result<(CovarianceEstimate, CovarianceEstimate)> {
    let first = samples
        .first()
        .ok_or(CovarianceError::TooFewSamples { required: 1, got: 0 })?;
    let (f, m) = (first.rows(), first.cols());
    if f == 0 || m == 0 {
        return Err(CovarianceError::ShapeMismatch("empty sample".into()));
    }
    if let Some(t) = samples.iter().position(|x| x.rows() != f || x.cols() != m) {
        return Err(CovarianceError::ShapeMismatch(format!(
            "sample {t} is {}x{}, expected {f}x{m}",
            samples[t].rows(),
            samples[t].cols()
        )));
    }

    let mut gram_a = Matrix::zeros(m, m);
    let mut gram_b = Matrix::zeros(f, f);
    for x in samples {
        let xt = x.transpose();
        let ga = xt.matmul(x)?;
        let gb = x.matmul(&xt)?;
        gram_a = gram_a.add(&ga)?;
        gram_b = gram_b.add(&gb)?;
    }

    let a = normalize(&gram_a, "column")?;
    let b = normalize(&gram_b, "row")?;
    let wrap = |matrix, kind| CovarianceEstimate {
        matrix,
        kind,
        huber_h: None,
        projected: false,
        epsilon: None,
    };
    Ok((wrap(a, CovarianceKind::GeminiA), wrap(b, CovarianceKind::GeminiB)))
}

fn normalize(gram: &Matrix, axis: &'static str) -> Result<SymMatrix> {
    let d = gram.rows();
    let scale: Vec<f64> = (0..d).map(|i| gram[(i, i)].sqrt()).collect();
    if let Some(index) = scale.iter().position(|&s| s == 0.0) {
        return Err(CovarianceError::DegenerateAxis { axis, index });
    }
    Ok(SymMatrix::from_fn(d, |i, j| {
        if i == j {
            1.0
        } else {
            (gram[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0)
        }
    }))
}
