//! DP density-ratio estimation (DP-DRE).
//!
//! A discriminator `D` is trained with DP-SGD to separate private features
//! (label 1) from public features (label 0). At the optimum
//! `D = P_priv / (P_priv + P_pub)`, so `D / (1 - D)` estimates the density
//! ratio `P_priv / P_pub`. Normalizing the ratio over the public pool gives a
//! categorical distribution that is resampled to approximate `P_priv`.
//!
//! Only the discriminator touches private data. Weighting and sampling are
//! post-processing: their signatures take no private features.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::accountant::{calibrate_sigma, default_orders};
use crate::budget::PrivacyBudget;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::nn::{batch_grads, dp_step, AdamConfig, AdamState, DpSgdConfig, Example, Head, Mlp};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreConfig {
    /// Hidden width of the two-layer discriminator.
    pub width: usize,
    pub sgd: DpSgdConfig,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for DreConfig {
    fn default() -> Self {
        Self {
            width: 16,
            sgd: DpSgdConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

/// Trained discriminator plus the privacy bookkeeping of its training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub network: Mlp,
    /// Achieved epsilon from the accountant; `inf` for non-private training.
    #[serde(with = "crate::budget::inf_serde")]
    pub eps_achieved: f64,
    pub delta: f64,
    pub sigma: f64,
    /// Poisson rounds charged by the accountant (always the configured `T`).
    pub steps: u64,
    /// Rounds whose batch was non-empty and produced an update.
    pub noisy_updates: u64,
    pub config_hash: String,
}

impl Discriminator {
    pub fn d(&self, v: &[f64]) -> Result<f64> {
        self.network.forward_scalar(v)
    }

    /// `D(v) / (1 - D(v))`.
    pub fn density_ratio(&self, v: &[f64]) -> Result<f64> {
        Ok(odds(self.d(v)?))
    }
}

fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

pub fn density_ratio(disc: &Discriminator, v: &[f64]) -> Result<f64> {
    disc.density_ratio(v)
}

/// Draws a Poisson batch: each index joins independently with probability `q`.
pub(crate) fn poisson_batch(n: usize, q: f64, rng: &mut SeededRng) -> Vec<usize> {
    (0..n).filter(|_| rng.uniform() < q).collect()
}

pub fn train_dp_dre(
    priv_features: &FeatureMatrix,
    pub_features: &FeatureMatrix,
    budget: &PrivacyBudget,
    cfg: &DreConfig,
    rng: &mut SeededRng,
) -> Result<Discriminator> {
    cfg.sgd.validate()?;
    priv_features.check_unit_ball()?;
    pub_features.check_unit_ball()?;
    if priv_features.d() != pub_features.d() {
        return Err(Error::DimensionMismatch {
            expected: priv_features.d(),
            got: pub_features.d(),
        });
    }
    if pub_features.n() == 0 {
        return Err(Error::InvalidInput("public pool is empty".into()));
    }
    if cfg.width == 0 {
        return Err(Error::Config("discriminator width must be positive".into()));
    }
    let n = priv_features.n();
    let q = cfg.sgd.sample_rate(n)?;
    let steps = cfg.sgd.iters;
    // Non-private training is plain SGD on the loss: no noise and no clipping,
    // since clipping alone already biases the fitted ratio.
    let (sigma, clip, eps_achieved) = if budget.is_private() {
        let cal = calibrate_sigma(budget.epsilon(), budget.delta(), q, steps, &default_orders())?;
        (cal.sigma, cfg.sgd.clip, cal.eps_achieved)
    } else {
        (0.0, f64::INFINITY, f64::INFINITY)
    };

    let d = priv_features.d();
    let mut net = Mlp::glorot(&[d, cfg.width, 1], Head::Sigmoid, &mut rng.split(0))?;
    let mut adam = AdamState::new(net.num_params(), cfg.adam);
    let mut batch_rng = rng.split(1);
    let mut noise_rng = rng.split(2);
    let mut noisy_updates = 0;

    for _ in 0..steps {
        let batch = poisson_batch(n, q, &mut batch_rng);
        if batch.is_empty() {
            continue;
        }
        let publics: Vec<usize> = (0..batch.len()).map(|_| batch_rng.index(pub_features.n())).collect();
        let examples: Vec<Example> = batch
            .iter()
            .zip(&publics)
            .map(|(&i, &j)| Example::Dre {
                private: priv_features.row(i),
                public: pub_features.row(j),
            })
            .collect();
        let grads = batch_grads(&net, &examples)?;
        let g = dp_step(&grads, clip, sigma, &mut noise_rng)?;
        adam.update(net.params_mut(), &g, cfg.sgd.lr);
        noisy_updates += 1;
    }
    net.validate()?;

    Ok(Discriminator {
        network: net,
        eps_achieved,
        delta: budget.delta(),
        sigma,
        steps,
        noisy_updates,
        config_hash: crate::json_fingerprint(&(cfg, budget)),
    })
}

/// Normalized sampling weights over a public pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPublicModel {
    pub weights: Vec<f64>,
    /// Fingerprint of the public matrix the weights index into.
    pub public_ref: String,
}

pub fn public_fingerprint(pub_features: &FeatureMatrix) -> String {
    crate::json_fingerprint(&(pub_features.d(), pub_features.data(), pub_features.labels()))
}

impl WeightedPublicModel {
    /// Builds a model from non-negative scores, normalizing them to sum to one.
    pub fn from_scores(scores: Vec<f64>, public_ref: String) -> Result<Self> {
        if scores.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("all weights are zero".into()));
        }
        Ok(Self {
            weights: scores.into_iter().map(|s| s / total).collect(),
            public_ref,
        })
    }

    pub fn uniform(pub_features: &FeatureMatrix) -> Result<Self> {
        Self::from_scores(vec![1.0; pub_features.n()], public_fingerprint(pub_features))
    }
}

/// `p_j = D†(v_j) / sum_k D†(v_k)` over the public pool.
pub fn compute_weights(disc: &Discriminator, pub_features: &FeatureMatrix) -> Result<WeightedPublicModel> {
    let scores = pub_features
        .rows()
        .map(|v| disc.density_ratio(v))
        .collect::<Result<Vec<_>>>()?;
    WeightedPublicModel::from_scores(scores, public_fingerprint(pub_features))
}

/// `k` categorical draws (with replacement) of public rows by their weights.
pub fn sample_dre(
    model: &WeightedPublicModel,
    pub_features: &FeatureMatrix,
    k: usize,
    rng: &mut SeededRng,
) -> Result<FeatureMatrix> {
    if k == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    if model.weights.len() != pub_features.n() {
        return Err(Error::DimensionMismatch {
            expected: pub_features.n(),
            got: model.weights.len(),
        });
    }
    if model.public_ref != public_fingerprint(pub_features) {
        return Err(Error::InvalidInput(
            "public features do not match the pool the weights were computed on".into(),
        ));
    }
    let mut cdf = Vec::with_capacity(model.weights.len());
    let mut acc = 0.0;
    for w in &model.weights {
        acc += w;
        cdf.push(acc);
    }
    let last_positive = model.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let picks: Vec<usize> = (0..k)
        .map(|_| {
            let u = rng.uniform() * acc;
            cdf.partition_point(|&c| c <= u).min(last_positive)
        })
        .collect();
    Ok(pub_features.select(&picks))
}

/// Total weight on public rows whose label lies in `targets`.
pub fn superclass_weight(
    model: &WeightedPublicModel,
    pub_labels: Option<&[u32]>,
    targets: &BTreeSet<u32>,
) -> Result<f64> {
    let labels = pub_labels.ok_or_else(|| Error::InvalidInput("public features carry no labels".into()))?;
    if labels.len() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            got: labels.len(),
        });
    }
    Ok(labels
        .iter()
        .zip(&model.weights)
        .filter(|(l, _)| targets.contains(l))
        .map(|(_, w)| w)
        .sum())
}
