use serde::{Deserialize, Serialize};

use super::mlp::{sigmoid, Head, Mlp, LOGIT_CLAMP};
use crate::error::{Error, Result};

/// Gradient penalty used by the GAN critic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "style")]
pub enum PenaltyStyle {
    /// `||dD/dx (x_real)||` with coefficient 1.
    Literal,
    /// `lambda * (||dD/dx (x_hat)|| - 1)^2` at `x_hat = t x_real + (1 - t) x_fake`.
    Standard { lambda: f64 },
}

/// One training example for a per-example loss.
#[derive(Debug, Clone, Copy)]
pub enum Example<'a> {
    /// Density-ratio discriminator: minimize `-[log D(private) + log(1 - D(public))]`.
    Dre { private: &'a [f64], public: &'a [f64] },
    /// WGAN critic: minimize `D(real) - D(fake) + penalty`. `t` is the
    /// interpolation weight used by the standard penalty.
    Critic {
        real: &'a [f64],
        fake: &'a [f64],
        penalty: PenaltyStyle,
        t: f64,
    },
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn require_head(mlp: &Mlp, head: Head) -> Result<()> {
    if mlp.head() != head || mlp.output_dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "loss needs a scalar network with a {head:?} head"
        )));
    }
    Ok(())
}

fn interpolate(real: &[f64], fake: &[f64], t: f64) -> Vec<f64> {
    real.iter().zip(fake).map(|(r, f)| t * r + (1.0 - t) * f).collect()
}

/// Loss value of one example, computed from forward passes only.
pub fn example_loss(mlp: &Mlp, ex: &Example) -> Result<f64> {
    match *ex {
        Example::Dre { private, public } => {
            require_head(mlp, Head::Sigmoid)?;
            let zp = mlp.trace(private)?.raw_output()[0].clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            let zq = mlp.trace(public)?.raw_output()[0].clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            Ok(softplus(-zp) + softplus(zq))
        }
        Example::Critic { real, fake, penalty, t } => {
            require_head(mlp, Head::Identity)?;
            let base = mlp.forward_scalar(real)? - mlp.forward_scalar(fake)?;
            let pen = match penalty {
                PenaltyStyle::Literal => super::l2_norm(&mlp.grad_wrt_input(real)?),
                PenaltyStyle::Standard { lambda } => {
                    let n = super::l2_norm(&mlp.grad_wrt_input(&interpolate(real, fake, t))?);
                    lambda * (n - 1.0) * (n - 1.0)
                }
            };
            Ok(base + pen)
        }
    }
}

/// Exact parameter gradient of the per-example loss, in canonical parameter order.
pub fn per_example_grad(mlp: &Mlp, ex: &Example) -> Result<Vec<f64>> {
    per_example_loss_and_grad(mlp, ex).map(|(_, g)| g)
}

/// Loss value together with its parameter gradient, sharing the forward passes.
pub fn per_example_loss_and_grad(mlp: &Mlp, ex: &Example) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; mlp.num_params()];
    let loss = match *ex {
        Example::Dre { private, public } => {
            require_head(mlp, Head::Sigmoid)?;
            let inside = |z: f64| z.abs() < LOGIT_CLAMP;
            let tp = mlp.trace(private)?;
            let zp = tp.raw_output()[0];
            if inside(zp) {
                mlp.backward(&tp, &[sigmoid(zp) - 1.0], 1.0, &mut grad, None);
            }
            let tq = mlp.trace(public)?;
            let zq = tq.raw_output()[0];
            if inside(zq) {
                mlp.backward(&tq, &[sigmoid(zq)], 1.0, &mut grad, None);
            }
            let clamp = |z: f64| z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            softplus(-clamp(zp)) + softplus(clamp(zq))
        }
        Example::Critic { real, fake, penalty, t } => {
            require_head(mlp, Head::Identity)?;
            let tr = mlp.trace(real)?;
            mlp.backward(&tr, &[1.0], 1.0, &mut grad, None);
            let tf = mlp.trace(fake)?;
            mlp.backward(&tf, &[-1.0], 1.0, &mut grad, None);
            let base = tr.raw_output()[0] - tf.raw_output()[0];
            let pen = match penalty {
                PenaltyStyle::Literal => mlp.input_grad_norm_with_param_grad(real, 1.0, &mut grad)?,
                PenaltyStyle::Standard { lambda } => {
                    let x_hat = interpolate(real, fake, t);
                    let n = super::l2_norm(&mlp.grad_wrt_input(&x_hat)?);
                    mlp.input_grad_norm_with_param_grad(&x_hat, 2.0 * lambda * (n - 1.0), &mut grad)?;
                    lambda * (n - 1.0) * (n - 1.0)
                }
            };
            base + pen
        }
    };
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NaN("per-example gradient"));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn zero_weight_dre_gradient_is_bias_only() {
        // Zero weights and zero input leave every hidden unit at zero, so only
        // the output bias carries gradient: (sigmoid(b) - 1) + sigmoid(b).
        let mut params = vec![0.0; 2 * 3 + 3 + 3 + 1];
        *params.last_mut().unwrap() = 1.0;
        let m = Mlp::from_params(&[2, 3, 1], Head::Sigmoid, params).unwrap();
        let zero = [0.0, 0.0];
        let g = per_example_grad(
            &m,
            &Example::Dre {
                private: &zero,
                public: &zero,
            },
        )
        .unwrap();
        let s = 1.0 / (1.0 + (-1.0f64).exp());
        assert!(g[..g.len() - 1].iter().all(|&v| v == 0.0));
        assert!((g[g.len() - 1] - (2.0 * s - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_loss() {
        let m = Mlp::zeros(&[2, 3, 1], Head::Sigmoid).unwrap();
        let v = [0.3, -0.2];
        let l = example_loss(
            &m,
            &Example::Dre {
                private: &v,
                public: &v,
            },
        )
        .unwrap();
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn wrong_head_rejected() {
        let m = Mlp::glorot(&[2, 1], Head::Identity, &mut SeededRng::new(0, 0)).unwrap();
        assert!(per_example_grad(
            &m,
            &Example::Dre {
                private: &[0.0, 0.0],
                public: &[0.0, 0.0]
            }
        )
        .is_err());
    }
}
