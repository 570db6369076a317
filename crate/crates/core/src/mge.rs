//! Differentially private diagonal-Gaussian estimation (DP-MGE).
//!
//! For unit-norm-bounded features, the mean and the mean of squares each have
//! L2 sensitivity `2/n`. Each is released with the Gaussian mechanism at half
//! the budget, `(eps/2, delta/2)`:
//!
//! ```text
//! mu_dp = mean(v)            + N(0, 4 sigma^2 / n^2 I)
//! s_dp  = mean(v^2) - mu_dp^2 + N(0, 4 sigma^2 / n^2 I)
//! ```
//!
//! with `sigma = gaussian_sigma(eps/2, delta/2)`. `s_dp` is floored so the model
//! always describes a valid Gaussian.

use serde::{Deserialize, Serialize};

use crate::accountant::gaussian_sigma;
use crate::budget::PrivacyBudget;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::SeededRng;

pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub mu: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(with = "crate::budget::inf_serde")]
    pub eps: f64,
    pub delta: f64,
}

impl GaussianModel {
    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.len() != self.s.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mu.len(),
                got: self.s.len(),
            });
        }
        if self.mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("model mean is not finite".into()));
        }
        if self.s.iter().any(|&v| !(v.is_finite() && v >= VARIANCE_FLOOR)) {
            return Err(Error::InvalidInput(format!(
                "model variances must be finite and >= {VARIANCE_FLOOR}"
            )));
        }
        Ok(())
    }
}

/// Standard deviation of the noise added to each coordinate of both statistics.
pub fn mge_noise_std(budget: &PrivacyBudget, n: usize) -> Result<f64> {
    if !budget.is_private() {
        return Ok(0.0);
    }
    let sigma = gaussian_sigma(budget.epsilon() / 2.0, budget.delta() / 2.0)?;
    Ok(2.0 * sigma / n as f64)
}

/// Plug-in mean and mean of squares.
pub fn moments(v: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let d = v.d();
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for r in v.rows() {
        for j in 0..d {
            m1[j] += r[j];
            m2[j] += r[j] * r[j];
        }
    }
    let inv = 1.0 / v.n() as f64;
    for j in 0..d {
        m1[j] *= inv;
        m2[j] *= inv;
    }
    (m1, m2)
}

pub fn fit_dp_mge(priv_features: &FeatureMatrix, budget: &PrivacyBudget, rng: &mut SeededRng) -> Result<GaussianModel> {
    priv_features.check_unit_ball()?;
    let n = priv_features.n();
    if n < 2 {
        return Err(Error::InvalidInput(format!("DP-MGE needs at least 2 rows, got {n}")));
    }
    let std = mge_noise_std(budget, n)?;
    let (mean, mean_sq) = moments(priv_features);
    let mu: Vec<f64> = mean.iter().map(|m| m + std * rng.normal()).collect();
    let s = mean_sq
        .iter()
        .zip(&mu)
        .map(|(m2, m)| (m2 - m * m + std * rng.normal()).max(VARIANCE_FLOOR))
        .collect();
    Ok(GaussianModel {
        mu,
        s,
        eps: budget.epsilon(),
        delta: budget.delta(),
    })
}

/// `k` draws from `N(mu, diag(s))`, each projected to the unit ball.
pub fn sample_mge(model: &GaussianModel, k: usize, rng: &mut SeededRng) -> Result<FeatureMatrix> {
    model.validate()?;
    if k == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let d = model.d();
    let sd: Vec<f64> = model.s.iter().map(|v| v.sqrt()).collect();
    let mut data = Vec::with_capacity(k * d);
    for _ in 0..k {
        for j in 0..d {
            data.push(model.mu[j] + sd[j] * rng.normal());
        }
    }
    Ok(FeatureMatrix::new(d, data, None)?.project_to_unit_ball())
}
