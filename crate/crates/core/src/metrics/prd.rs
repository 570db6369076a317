//! Distribution-level precision and recall from a binned PRD curve.

use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const PRD_CLUSTERS: usize = 20;
pub const PRD_ANGLES: usize = 1001;
const ANGLE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrdResult {
    /// `max F_{1/8}` over the curve.
    pub precision: f64,
    /// `max F_8` over the curve.
    pub recall: f64,
    /// `(alpha, beta)` per slope.
    pub curve: Vec<(f64, f64)>,
}

fn f_beta(alpha: f64, beta: f64, b: f64) -> f64 {
    if alpha == 0.0 && beta == 0.0 {
        return 0.0;
    }
    let b2 = b * b;
    (1.0 + b2) * alpha * beta / (b2 * alpha + beta)
}

/// PRD curve of histogram `fake` against histogram `real` at slopes `tan(theta)`.
fn curve(real: &[f64], fake: &[f64], angles: usize) -> Vec<(f64, f64)> {
    let span = std::f64::consts::FRAC_PI_2 - 2.0 * ANGLE_EPS;
    (0..angles)
        .map(|i| {
            let theta = if angles == 1 {
                std::f64::consts::FRAC_PI_4
            } else {
                ANGLE_EPS + span * i as f64 / (angles - 1) as f64
            };
            let slope = theta.tan();
            let alpha: f64 = real.iter().zip(fake).map(|(p, q)| (slope * p).min(*q)).sum();
            let beta = alpha / slope;
            (alpha.clamp(0.0, 1.0), beta.clamp(0.0, 1.0))
        })
        .collect()
}

fn histogram(assign: impl Iterator<Item = usize>, k: usize, n: usize) -> Vec<f64> {
    let mut h = vec![0.0; k];
    for c in assign {
        h[c] += 1.0;
    }
    h.iter_mut().for_each(|x| *x /= n as f64);
    h
}

/// Clusters the union of both sets, histograms each over the clusters and
/// summarizes the PRD curve by `max F_8` (recall) and `max F_{1/8}` (precision).
///
/// The union is clustered in a canonical (sorted) row order so the result
/// depends only on the two sets, not on which one is passed first.
pub fn prd_precision_recall(
    real: &FeatureMatrix,
    fake: &FeatureMatrix,
    k: usize,
    angles: usize,
    seed: u64,
) -> Result<PrdResult> {
    if real.n() == 0 || fake.n() == 0 {
        return Err(Error::InvalidInput("PRD needs non-empty sets".into()));
    }
    if real.d() != fake.d() {
        return Err(Error::DimensionMismatch {
            expected: real.d(),
            got: fake.d(),
        });
    }
    if angles == 0 {
        return Err(Error::InvalidInput("PRD needs at least one angle".into()));
    }
    let mut union: Vec<&[f64]> = real.rows().chain(fake.rows()).collect();
    union.sort_by(|a, b| {
        a.iter()
            .zip(*b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if union.windows(2).all(|w| w[0] == w[1]) {
        return Ok(PrdResult {
            precision: 1.0,
            recall: 1.0,
            curve: vec![(1.0, 1.0)],
        });
    }
    let pooled = FeatureMatrix::new(real.d(), union.concat(), None)?;
    let clusters = kmeans(&pooled, k, seed)?;
    let p = histogram(real.rows().map(|r| clusters.assign(r)), k, real.n());
    let q = histogram(fake.rows().map(|r| clusters.assign(r)), k, fake.n());
    let curve = curve(&p, &q, angles);
    let recall = curve.iter().map(|&(a, b)| f_beta(a, b, 8.0)).fold(0.0, f64::max);
    let precision = curve.iter().map(|&(a, b)| f_beta(a, b, 1.0 / 8.0)).fold(0.0, f64::max);
    Ok(PrdResult {
        precision,
        recall,
        curve,
    })
}
