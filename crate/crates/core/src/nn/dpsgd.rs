use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{per_example_grad, per_example_loss_and_grad, Example};
use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Hyperparameters of a DP-SGD run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSgdConfig {
    /// Iterations `T`.
    pub iters: u64,
    pub lr: f64,
    /// Expected batch size `B`; the Poisson rate is `B / n`.
    pub batch: usize,
    /// Per-example clipping norm `C`.
    pub clip: f64,
    pub seed: u64,
}

impl Default for DpSgdConfig {
    fn default() -> Self {
        Self {
            iters: 10_000,
            lr: 1e-3,
            batch: 64,
            clip: 1.0,
            seed: 0,
        }
    }
}

impl DpSgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::Config("iters must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(Error::Config(format!("clip norm must be positive, got {}", self.clip)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }

    /// Poisson sample rate for a private set of `n` rows.
    pub fn sample_rate(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidInput("private set is empty".into()));
        }
        Ok((self.batch as f64 / n as f64).min(1.0))
    }
}

/// Scales `g` in place by `1 / max(1, ||g|| / clip)`.
pub fn clip_to_norm(g: &mut [f64], clip: f64) {
    let norm = super::l2_norm(g);
    if norm > clip {
        let s = clip / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

/// Per-example gradients, computed in parallel and returned in input order.
pub fn batch_grads(mlp: &Mlp, examples: &[Example]) -> Result<Vec<Vec<f64>>> {
    examples
        .par_iter()
        .with_min_len(16)
        .map(|ex| per_example_grad(mlp, ex))
        .collect()
}

/// Per-example losses and gradients, in input order.
pub fn batch_losses_and_grads(mlp: &Mlp, examples: &[Example]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let pairs: Vec<(f64, Vec<f64>)> = examples
        .par_iter()
        .with_min_len(16)
        .map(|ex| per_example_loss_and_grad(mlp, ex))
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// `(1/B) [ sum_i clip(g_i) + N(0, sigma^2 C^2 I) ]`, summed in index order.
pub fn dp_step(grads: &[Vec<f64>], clip: f64, sigma: f64, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let first = grads
        .first()
        .ok_or_else(|| Error::InvalidInput("dp_step needs a non-empty batch".into()))?;
    if !(clip > 0.0) {
        return Err(Error::Domain(format!("clip norm must be positive, got {clip}")));
    }
    let p = first.len();
    let mut sum = vec![0.0; p];
    let mut buf = vec![0.0; p];
    for g in grads {
        if g.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: g.len(),
            });
        }
        buf.copy_from_slice(g);
        clip_to_norm(&mut buf, clip);
        for (s, b) in sum.iter_mut().zip(&buf) {
            *s += b;
        }
    }
    if sigma > 0.0 {
        let std = sigma * clip;
        for s in sum.iter_mut() {
            *s += std * rng.normal();
        }
    }
    let inv = 1.0 / grads.len() as f64;
    sum.iter_mut().for_each(|s| *s *= inv);
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn noiseless_small_grads_average_exactly() {
        let g = vec![vec![0.1, 0.2], vec![0.3, -0.4]];
        let out = dp_step(&g, 10.0, 0.0, &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(out, vec![(0.1 + 0.3) / 2.0, (0.2 - 0.4) / 2.0]);
    }

    #[test]
    fn large_gradient_clipped_to_c() {
        let g = vec![vec![6.0, 8.0]];
        let out = dp_step(&g, 1.0, 0.0, &mut SeededRng::new(0, 0)).unwrap();
        assert!((super::super::l2_norm(&out) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(dp_step(&[], 1.0, 1.0, &mut SeededRng::new(0, 0)).is_err());
    }

    #[test]
    fn noise_std_matches_sigma_c() {
        let mut rng = SeededRng::new(11, 0);
        let zero = vec![vec![0.0; 4]];
        let draws = 10_000;
        let mut sq = [0.0; 4];
        for _ in 0..draws {
            let out = dp_step(&zero, 1.0, 1.0, &mut rng).unwrap();
            for j in 0..4 {
                sq[j] += out[j] * out[j];
            }
        }
        for s in sq {
            let std = (s / draws as f64).sqrt();
            assert!((std - 1.0).abs() < 0.05, "{std}");
        }
    }

    proptest! {
        #[test]
        fn clipping_never_increases_norm(g in proptest::collection::vec(-100.0f64..100.0, 1..20), c in 0.01f64..10.0) {
            let before = super::super::l2_norm(&g);
            let mut h = g.clone();
            clip_to_norm(&mut h, c);
            let after = super::super::l2_norm(&h);
            prop_assert!(after <= before + 1e-12);
            prop_assert!(after <= c + 1e-12);
        }
    }
}
