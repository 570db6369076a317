use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Unbiased sample covariance (`n - 1` denominator).
pub fn covariance(m: &FeatureMatrix) -> DMatrix<f64> {
    let (n, d) = (m.n(), m.d());
    let mu = m.mean();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut c = vec![0.0; d];
    for r in m.rows() {
        for j in 0..d {
            c[j] = r[j] - mu[j];
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += c[a] * c[b];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussians moment-matched to `a` and `b`:
/// `|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})`.
///
/// The trace of the cross term is `Tr((S_b^{1/2} S_a S_b^{1/2})^{1/2})`, read off a
/// symmetric eigendecomposition with eigenvalues clamped at zero.
pub fn fid(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            expected: a.d(),
            got: b.d(),
        });
    }
    if a.n() < 2 || b.n() < 2 {
        return Err(Error::InvalidInput("FID needs at least two rows per set".into()));
    }
    if a.n() <= a.d() || b.n() <= b.d() {
        log::warn!(
            "FID with n <= d (n_a={}, n_b={}, d={}): covariances are singular",
            a.n(),
            b.n(),
            a.d()
        );
    }
    let mean_term: f64 = a.mean().iter().zip(b.mean()).map(|(x, y)| (x - y) * (x - y)).sum();
    let ca = covariance(a);
    let cb = covariance(b);
    if ca == cb {
        // Equal covariances cancel the trace term exactly.
        return Ok(mean_term);
    }
    let sb = psd_sqrt(&cb);
    let mut inner = &sb * &ca * &sb;
    inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    let value = mean_term + ca.trace() + cb.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}
