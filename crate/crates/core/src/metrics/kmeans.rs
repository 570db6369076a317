//! k-means with k-means++ seeding and Lloyd iterations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::SeededRng;

pub const KMEANS_MAX_ITERS: usize = 100;
pub const KMEANS_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub k: usize,
    pub d: usize,
    /// Row-major `k x d`.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Clusters with no assigned point after the final assignment.
    pub empty: Vec<usize>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.d..(c + 1) * self.d]
    }

    /// Index of the centroid nearest to `x`.
    pub fn assign(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, self.d, x).0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid (lowest index on ties) and its squared distance.
pub fn nearest(centroids: &[f64], d: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.chunks_exact(d).enumerate() {
        let dist = sq_dist(mu, x);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn plus_plus(data: &FeatureMatrix, k: usize, rng: &mut SeededRng) -> Vec<f64> {
    let n = data.n();
    let mut centroids = Vec::with_capacity(k * data.d());
    centroids.extend_from_slice(data.row(rng.index(n)));
    let mut dist: Vec<f64> = data.rows().map(|r| sq_dist(r, &centroids[..])).collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if acc > u && w > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.index(n)
        };
        let c = data.row(pick).to_vec();
        for (dv, r) in dist.iter_mut().zip(data.rows()) {
            *dv = dv.min(sq_dist(r, &c));
        }
        centroids.extend(c);
    }
    centroids
}

fn assign_all(data: &FeatureMatrix, centroids: &[f64]) -> (Vec<usize>, f64) {
    let d = data.d();
    let pairs: Vec<(usize, f64)> = (0..data.n())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| nearest(centroids, d, data.row(i)))
        .collect();
    let inertia = pairs.iter().map(|p| p.1).sum();
    (pairs.into_iter().map(|p| p.0).collect(), inertia)
}

/// Clusters the rows of `data` into `k` groups. Deterministic given `seed`.
///
/// Lloyd iterations stop once the relative change in inertia falls below
/// [`KMEANS_REL_TOL`] or after [`KMEANS_MAX_ITERS`]. Empty clusters keep their
/// previous centroid. A final assignment pass guarantees every point is mapped
/// to its nearest returned centroid.
pub fn kmeans(data: &FeatureMatrix, k: usize, seed: u64) -> Result<KMeansResult> {
    let (n, d) = (data.n(), data.d());
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "k-means needs at least k={k} points, got {n}"
        )));
    }
    let mut rng = SeededRng::new(seed, 0x6b6d);
    let mut centroids = plus_plus(data, k, &mut rng);
    let (mut assignments, mut inertia) = assign_all(data, &centroids);
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERS {
        iterations += 1;
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for j in 0..d {
                    centroids[c * d + j] = sums[c * d + j] * inv;
                }
            }
        }
        let (a, new_inertia) = assign_all(data, &centroids);
        let converged = inertia == 0.0 || (inertia - new_inertia).abs() / inertia < KMEANS_REL_TOL;
        assignments = a;
        inertia = new_inertia;
        if converged {
            break;
        }
    }
    let mut counts = vec![0usize; k];
    for &c in &assignments {
        counts[c] += 1;
    }
    Ok(KMeansResult {
        k,
        d,
        centroids,
        assignments,
        inertia,
        empty: (0..k).filter(|&c| counts[c] == 0).collect(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_nearest(data: &FeatureMatrix, r: &KMeansResult) {
        for (i, row) in data.rows().enumerate() {
            let mine = sq_dist(row, r.centroid(r.assignments[i]));
            for c in 0..r.k {
                assert!(mine <= sq_dist(row, r.centroid(c)));
            }
        }
    }

    #[test]
    fn distinct_points_get_own_cluster() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let r = kmeans(&m, 6, 1).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.assignments.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 6);
        check_nearest(&m, &r);
    }

    #[test]
    fn two_blobs() {
        let mut rng = SeededRng::new(5, 0);
        let mut rows = Vec::new();
        for i in 0..400 {
            let c = if i % 2 == 0 { -1.0 } else { 1.0 };
            rows.push(vec![c + 0.05 * rng.normal(), 0.05 * rng.normal()]);
        }
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let r = kmeans(&m, 2, 3).unwrap();
        let mut xs: Vec<f64> = (0..2).map(|c| r.centroid(c)[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 1.0).abs() < 0.05 && (xs[1] - 1.0).abs() < 0.05);
        check_nearest(&m, &r);
    }

    #[test]
    fn too_few_points() {
        let m = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(kmeans(&m, 3, 0).is_err());
    }

    #[test]
    fn duplicates_do_not_break_seeding() {
        let m = FeatureMatrix::from_rows(&vec![vec![0.5, 0.5]; 10]).unwrap();
        let r = kmeans(&m, 4, 0).unwrap();
        assert_eq!(r.inertia, 0.0);
        check_nearest(&m, &r);
    }

    #[test]
    fn seeded_reproducibility() {
        let mut rng = SeededRng::new(8, 0);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.normal(), rng.normal(), rng.normal()])
            .collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let a = kmeans(&m, 7, 42).unwrap();
        let b = kmeans(&m, 7, 42).unwrap();
        assert_eq!(a, b);
        check_nearest(&m, &a);
    }
}
