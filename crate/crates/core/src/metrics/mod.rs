//! Generative-quality metrics computed directly on feature vectors.

mod fid;
mod kmeans;
mod ndb;
mod prd;

use serde::{Deserialize, Serialize};

pub use fid::{covariance, fid};
pub use kmeans::{kmeans, nearest, KMeansResult, KMEANS_MAX_ITERS, KMEANS_REL_TOL};
pub use ndb::{ndb, BinStat, NdbResult, NDB_BINS};
pub use prd::{prd_precision_recall, PrdResult, PRD_ANGLES, PRD_CLUSTERS};

use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSet {
    pub fid: bool,
    pub prd: bool,
    pub ndb: bool,
}

impl MetricSet {
    pub const ALL: MetricSet = MetricSet {
        fid: true,
        prd: true,
        ndb: true,
    };
}

/// Metric values of one generated set against one reference set. Metrics
/// that were not requested are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fid: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub ndb_count: Option<usize>,
    pub ndb_fraction: Option<f64>,
    pub per_bin: Option<Vec<BinStat>>,
    /// PRD curve points `(alpha, beta)`.
    pub prd_curve: Option<Vec<(f64, f64)>>,
}

pub fn evaluate(real: &FeatureMatrix, fake: &FeatureMatrix, which: MetricSet, seed: u64) -> Result<MetricsReport> {
    let root = SeededRng::new(seed, 0);
    let fid_value = which.fid.then(|| fid(real, fake)).transpose()?;
    let prd = which
        .prd
        .then(|| prd_precision_recall(real, fake, PRD_CLUSTERS, PRD_ANGLES, root.split(1).next_seed()))
        .transpose()?;
    let ndb = which
        .ndb
        .then(|| ndb(real, fake, NDB_BINS, 0.05, root.split(2).next_seed()))
        .transpose()?;
    Ok(MetricsReport {
        fid: fid_value,
        precision: prd.as_ref().map(|p| p.precision),
        recall: prd.as_ref().map(|p| p.recall),
        ndb_count: ndb.as_ref().map(|n| n.count),
        ndb_fraction: ndb.as_ref().map(|n| n.count as f64 / n.bins.len() as f64),
        per_bin: ndb.map(|n| n.bins),
        prd_curve: prd.map(|p| p.curve),
    })
}
