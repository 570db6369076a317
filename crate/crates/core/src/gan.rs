//! DP training of a latent-space WGAN over feature vectors.
//!
//! Each outer iteration runs five critic steps and one generator step. Only
//! critic steps read private data; each one Poisson-samples a private batch,
//! clips per-example gradients of `D(x_real) - D(x_fake) + penalty` and adds
//! Gaussian noise. The accountant therefore charges `5 T` sampled-Gaussian
//! rounds. The generator step descends `mean D(G(z))` and only sees the
//! critic's parameters.
//!
//! Two initializations are supported: random (`MI`) and a generator/critic
//! pair pretrained non-privately on public features (`FT`).

use serde::{Deserialize, Serialize};

use crate::accountant::{calibrate_sigma, default_orders};
use crate::budget::PrivacyBudget;
use crate::dre::poisson_batch;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::metrics::fid;
use crate::nn::{
    batch_losses_and_grads, dp_step, AdamConfig, AdamState, DpSgdConfig, Example, Head, Mlp, PenaltyStyle,
};
use crate::rng::SeededRng;

pub const CRITIC_STEPS: u64 = 5;
/// Critic losses above this magnitude abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub z_dim: usize,
    /// Hidden width shared by the generator and critic (both 4-layer MLPs).
    pub width: usize,
    pub sgd: DpSgdConfig,
    pub penalty: PenaltyStyle,
    /// Keep the generator with the best non-private FID against the training
    /// features, evaluated every `max(1, T/20)` iterations. This selection is
    /// not covered by the privacy accounting.
    pub select_best: bool,
    pub eval_samples: usize,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            z_dim: 25,
            width: 32,
            sgd: DpSgdConfig {
                iters: 1000,
                lr: 1e-3,
                batch: 64,
                clip: 1.0,
                seed: 0,
            },
            penalty: PenaltyStyle::Literal,
            select_best: true,
            eval_samples: 1000,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentGan {
    pub generator: Mlp,
    pub critic: Mlp,
    pub z_dim: usize,
    #[serde(with = "crate::budget::inf_serde")]
    pub eps_achieved: f64,
    pub sigma: f64,
    /// Poisson rounds charged by the accountant: `5 T`.
    pub critic_rounds: u64,
    /// Set when the returned generator was picked by an unaccounted FID selection.
    pub selection_unaccounted: bool,
}

impl LatentGan {
    pub fn random(d: usize, cfg: &GanConfig, rng: &mut SeededRng) -> Result<Self> {
        let w = cfg.width;
        Ok(Self {
            generator: Mlp::glorot(&[cfg.z_dim, w, w, w, d], Head::Identity, &mut rng.split(0))?,
            critic: Mlp::glorot(&[d, w, w, w, 1], Head::Identity, &mut rng.split(1))?,
            z_dim: cfg.z_dim,
            eps_achieved: f64::INFINITY,
            sigma: 0.0,
            critic_rounds: 0,
            selection_unaccounted: false,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.generator.output_dim()
    }

    fn generate_raw(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.generator.forward(z)
    }
}

fn latent(z_dim: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..z_dim).map(|_| rng.normal()).collect()
}

/// `k` generated feature vectors, projected to the unit ball.
pub fn sample_gan(gan: &LatentGan, k: usize, rng: &mut SeededRng) -> Result<FeatureMatrix> {
    if k == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let d = gan.feature_dim();
    let mut data = Vec::with_capacity(k * d);
    for _ in 0..k {
        data.extend(gan.generate_raw(&latent(gan.z_dim, rng))?);
    }
    Ok(FeatureMatrix::new(d, data, None)?.project_to_unit_ball())
}

/// Gradient of `(1/B) sum_i D(G(z_i))` with respect to the generator parameters.
///
/// Takes no private data: the critic is the only channel to it.
pub fn generator_grad(generator: &Mlp, critic: &Mlp, batch: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; generator.num_params()];
    let scale = 1.0 / batch as f64;
    for _ in 0..batch {
        let z = latent(generator.input_dim(), rng);
        let trace = generator.trace(&z)?;
        let dx = critic.grad_wrt_input(trace.raw_output())?;
        generator.backward(&trace, &dx, scale, &mut grad, None);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NaN("generator gradient"));
    }
    Ok(grad)
}

struct Schedule {
    sigma: f64,
    clip: f64,
}

fn validate_cfg(cfg: &GanConfig) -> Result<()> {
    cfg.sgd.validate()?;
    if cfg.z_dim == 0 || cfg.width == 0 {
        return Err(Error::Config("z_dim and width must be positive".into()));
    }
    if cfg.select_best && cfg.eval_samples < 2 {
        return Err(Error::Config(
            "eval_samples must be at least 2 for checkpoint selection".into(),
        ));
    }
    Ok(())
}

fn train_loop(
    data: &FeatureMatrix,
    mut gan: LatentGan,
    cfg: &GanConfig,
    schedule: Schedule,
    rng: &mut SeededRng,
) -> Result<LatentGan> {
    let n = data.n();
    let q = cfg.sgd.sample_rate(n)?;
    let mut critic_adam = AdamState::new(gan.critic.num_params(), cfg.adam);
    let mut gen_adam = AdamState::new(gan.generator.num_params(), cfg.adam);
    let mut batch_rng = rng.split(10);
    let mut fake_rng = rng.split(11);
    let mut noise_rng = rng.split(12);
    let mut gen_rng = rng.split(13);
    let eval_rng = rng.split(14);

    let iters = cfg.sgd.iters;
    let eval_every = (iters / 20).max(1);
    let mut best: Option<(f64, Mlp, Mlp)> = None;

    for t in 0..iters {
        for tau in 0..CRITIC_STEPS {
            let batch = poisson_batch(n, q, &mut batch_rng);
            if batch.is_empty() {
                continue;
            }
            let fakes = (0..batch.len())
                .map(|_| gan.generate_raw(&latent(gan.z_dim, &mut fake_rng)))
                .collect::<Result<Vec<_>>>()?;
            let examples: Vec<Example> = batch
                .iter()
                .zip(&fakes)
                .map(|(&i, f)| Example::Critic {
                    real: data.row(i),
                    fake: f,
                    penalty: cfg.penalty,
                    t: fake_rng.uniform(),
                })
                .collect();
            let (losses, grads) = batch_losses_and_grads(&gan.critic, &examples)?;
            let loss = losses.iter().sum::<f64>() / losses.len() as f64;
            if !loss.is_finite() || loss.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Diverged {
                    step: (t * CRITIC_STEPS + tau) as usize,
                    loss,
                });
            }
            let g = dp_step(&grads, schedule.clip, schedule.sigma, &mut noise_rng)?;
            critic_adam.update(gan.critic.params_mut(), &g, cfg.sgd.lr);
        }
        let g = generator_grad(&gan.generator, &gan.critic, cfg.sgd.batch, &mut gen_rng)?;
        gen_adam.update(gan.generator.params_mut(), &g, cfg.sgd.lr);

        if cfg.select_best && ((t + 1) % eval_every == 0 || t + 1 == iters) {
            let samples = sample_gan(&gan, cfg.eval_samples, &mut eval_rng.clone())?;
            let score = fid(&samples, data)?;
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                best = Some((score, gan.generator.clone(), gan.critic.clone()));
            }
        }
    }
    if let Some((_, g, c)) = best {
        gan.generator = g;
        gan.critic = c;
        gan.selection_unaccounted = true;
    }
    gan.generator.validate()?;
    gan.critic.validate()?;
    Ok(gan)
}

/// Non-private WGAN training on public features (no clipping, no noise).
pub fn pretrain_public_gan(pub_features: &FeatureMatrix, cfg: &GanConfig, rng: &mut SeededRng) -> Result<LatentGan> {
    validate_cfg(cfg)?;
    pub_features.check_unit_ball()?;
    let init = LatentGan::random(pub_features.d(), cfg, &mut rng.split(0))?;
    let mut gan = train_loop(
        pub_features,
        init,
        cfg,
        Schedule {
            sigma: 0.0,
            clip: f64::INFINITY,
        },
        &mut rng.split(1),
    )?;
    gan.critic_rounds = 0;
    gan.eps_achieved = f64::INFINITY;
    Ok(gan)
}

/// DP training on private features from `init` (fine-tuning) or from a random init.
pub fn train_dp_latent_gan(
    priv_features: &FeatureMatrix,
    init: Option<&LatentGan>,
    budget: &PrivacyBudget,
    cfg: &GanConfig,
    rng: &mut SeededRng,
) -> Result<LatentGan> {
    validate_cfg(cfg)?;
    priv_features.check_unit_ball()?;
    let d = priv_features.d();
    let start = match init {
        Some(g) => {
            if g.feature_dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: g.feature_dim(),
                });
            }
            g.clone()
        }
        None => LatentGan::random(d, cfg, &mut rng.split(0))?,
    };
    let q = cfg.sgd.sample_rate(priv_features.n())?;
    let rounds = CRITIC_STEPS * cfg.sgd.iters;
    let (sigma, clip, eps_achieved) = if budget.is_private() {
        let cal = calibrate_sigma(budget.epsilon(), budget.delta(), q, rounds, &default_orders())?;
        (cal.sigma, cfg.sgd.clip, cal.eps_achieved)
    } else {
        (0.0, f64::INFINITY, f64::INFINITY)
    };
    let mut gan = train_loop(
        priv_features,
        LatentGan {
            selection_unaccounted: false,
            ..start
        },
        cfg,
        Schedule { sigma, clip },
        &mut rng.split(1),
    )?;
    gan.eps_achieved = eps_achieved;
    gan.sigma = sigma;
    gan.critic_rounds = rounds;
    Ok(gan)
}
