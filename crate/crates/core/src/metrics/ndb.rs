//! Number of statistically different bins.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::kmeans::kmeans;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const NDB_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    /// Proportion of reference rows in the bin.
    pub p_real: f64,
    /// Proportion of generated rows in the bin.
    pub p_fake: f64,
    /// Two-proportion z statistic; `"inf"` when the pooled proportion is 0 or 1 and the two differ.
    #[serde(with = "crate::budget::inf_serde")]
    pub z: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdbResult {
    pub count: usize,
    pub bins: Vec<BinStat>,
}

/// Two-sided critical value `Phi^{-1}(1 - significance / 2)`.
pub fn critical_value(significance: f64) -> Result<f64> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::Domain(format!(
            "significance must lie in (0, 1), got {significance}"
        )));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - significance / 2.0))
}

/// Pooled two-proportion z statistic for proportions `p` (of `n`) and `q` (of `m`).
fn two_proportion_z(p: f64, n: usize, q: f64, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    let pooled = (p * n + q * m) / (n + m);
    if pooled <= 0.0 || pooled >= 1.0 {
        return if p == q { 0.0 } else { f64::INFINITY };
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n + 1.0 / m)).sqrt();
    (p - q) / se
}

/// Clusters `real` into `k` bins, assigns `fake` to the nearest bin and counts
/// bins whose proportions differ significantly under a two-sided z-test.
pub fn ndb(real: &FeatureMatrix, fake: &FeatureMatrix, k: usize, significance: f64, seed: u64) -> Result<NdbResult> {
    if real.d() != fake.d() {
        return Err(Error::DimensionMismatch {
            expected: real.d(),
            got: fake.d(),
        });
    }
    if fake.n() == 0 {
        return Err(Error::InvalidInput("NDB needs a non-empty generated set".into()));
    }
    let threshold = critical_value(significance)?;
    let clusters = kmeans(real, k, seed)?;
    let mut real_counts = vec![0usize; k];
    for &c in &clusters.assignments {
        real_counts[c] += 1;
    }
    let mut fake_counts = vec![0usize; k];
    for r in fake.rows() {
        fake_counts[clusters.assign(r)] += 1;
    }
    let (n, m) = (real.n(), fake.n());
    let bins: Vec<BinStat> = real_counts
        .iter()
        .zip(&fake_counts)
        .map(|(&a, &b)| {
            let p_real = a as f64 / n as f64;
            let p_fake = b as f64 / m as f64;
            let z = two_proportion_z(p_real, n, p_fake, m);
            BinStat {
                p_real,
                p_fake,
                z,
                significant: z.abs() > threshold,
            }
        })
        .collect();
    Ok(NdbResult {
        count: bins.iter().filter(|b| b.significant).count(),
        bins,
    })
}
