//! Mixture-of-Gaussians stand-in for a pretrained feature extractor.
//!
//! Public features come from `M` isotropic modes whose centers sit at a fixed
//! radius along (as far as the dimension allows) orthogonal directions. The
//! private set uses the same modes restricted to a subset `S`, so the private
//! support is contained in the public one.

use rand::seq::SliceRandom;

use super::config::OracleConfig;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::SeededRng;

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub public: FeatureMatrix,
    pub private: FeatureMatrix,
    pub centers: Vec<Vec<f64>>,
}

fn mode_centers(cfg: &OracleConfig, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut centers = Vec::with_capacity(cfg.modes);
    while centers.len() < cfg.modes {
        let mut v: Vec<f64> = (0..cfg.d).map(|_| rng.normal()).collect();
        if basis.len() < cfg.d {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        if basis.len() < cfg.d {
            basis.push(v.clone());
        }
        centers.push(v.into_iter().map(|x| x * cfg.radius).collect());
    }
    centers
}

fn draw(
    centers: &[Vec<f64>],
    modes: &[u32],
    cum: &[f64],
    n: usize,
    std: f64,
    rng: &mut SeededRng,
) -> Result<FeatureMatrix> {
    let d = centers[0].len();
    let total = *cum.last().unwrap();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.uniform() * total;
        let k = cum.partition_point(|&c| c <= u).min(modes.len() - 1);
        let mode = modes[k];
        for &c in &centers[mode as usize] {
            data.push(c + std * rng.normal());
        }
        labels.push(mode);
    }
    Ok(FeatureMatrix::new(d, data, Some(labels))?.project_to_unit_ball())
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

pub fn gen_synthetic(cfg: &OracleConfig, rng: &mut SeededRng) -> Result<SyntheticData> {
    cfg.validate()?;
    let centers = mode_centers(cfg, &mut rng.split(0));
    let all: Vec<u32> = (0..cfg.modes as u32).collect();
    let public = draw(
        &centers,
        &all,
        &cumulative(&vec![1.0; cfg.modes]),
        cfg.n_pub,
        cfg.std,
        &mut rng.split(1),
    )?;
    let weights = cfg
        .private_weights
        .clone()
        .unwrap_or_else(|| vec![1.0; cfg.private_modes.len()]);
    let private = draw(
        &centers,
        &cfg.private_modes,
        &cumulative(&weights),
        cfg.n_priv,
        cfg.std,
        &mut rng.split(2),
    )?;
    let public_labels = public.labels().unwrap();
    for &l in private.labels().unwrap() {
        if !public_labels.contains(&l) {
            return Err(Error::Config(format!(
                "private mode {l} never drawn in the public pool"
            )));
        }
    }
    Ok(SyntheticData {
        public,
        private,
        centers,
    })
}

/// Shuffles the private rows and splits them into (train, held-out eval) halves.
pub fn split_private(private: &FeatureMatrix, rng: &mut SeededRng) -> (FeatureMatrix, FeatureMatrix) {
    let mut idx: Vec<usize> = (0..private.n()).collect();
    idx.shuffle(rng);
    let half = private.n() / 2;
    (private.select(&idx[..half]), private.select(&idx[half..]))
}
