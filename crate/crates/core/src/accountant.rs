//! Privacy calibration for the Gaussian mechanism and for DP-SGD.
//!
//! Two routes are provided. The closed form treats a single Gaussian release
//! with the RDP-to-DP conversion minimized over a real order. The sampled
//! Gaussian route bounds the RDP of one Poisson-subsampled step at integer
//! orders, composes over `T` steps and converts with the same
//! `eps = rdp + log(1/delta)/(alpha-1)` rule, minimized over an order grid.
//! Neighboring datasets are add/remove-one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper ends of the noise-multiplier search bracket.
pub const SIGMA_BRACKET: (f64, f64) = (1e-2, 1e4);
/// Calibrated sigma achieves an epsilon within this relative slack below the target.
pub const CALIBRATION_REL_TOL: f64 = 1e-4;
const MAX_BISECTIONS: usize = 100;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Noise multiplier of a sensitivity-1 Gaussian mechanism that is `(eps, delta)`-DP:
/// `(sqrt(2 log(1/delta) + 2 eps) + sqrt(2 log(1/delta))) / (2 eps)`.
///
/// Infinite `eps` means no privacy and returns 0.
pub fn gaussian_sigma(eps: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    if eps.is_infinite() {
        return Ok(0.0);
    }
    let two_l = 2.0 * (1.0 / delta).ln();
    Ok(((two_l + 2.0 * eps).sqrt() + two_l.sqrt()) / (2.0 * eps))
}

/// Smallest epsilon certified for noise multiplier `sigma`:
/// `sqrt(2 log(1/delta)) / sigma + 1 / (2 sigma^2)`, attained at
/// `alpha = 1 + sqrt(2 sigma^2 log(1/delta))`.
pub fn gaussian_epsilon(sigma: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let two_l = 2.0 * (1.0 / delta).ln();
    Ok(two_l.sqrt() / sigma + 1.0 / (2.0 * sigma * sigma))
}

/// The real order minimizing the Gaussian conversion.
pub fn gaussian_optimal_order(sigma: f64, delta: f64) -> f64 {
    1.0 + (2.0 * sigma * sigma * (1.0 / delta).ln()).sqrt()
}

/// Integer orders 2..=64 plus 128 and 256.
pub fn default_orders() -> Vec<u32> {
    (2..=64).chain([128, 256]).collect()
}

/// Integer orders 2..=`max`.
pub fn orders_up_to(max: u32) -> Vec<u32> {
    (2..=max.max(2)).collect()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// RDP at integer order `alpha` of one step of the Poisson-subsampled Gaussian
/// mechanism with sample rate `q` and noise multiplier `sigma`:
///
/// `log( sum_k C(alpha,k) (1-q)^(alpha-k) q^k exp((k^2-k)/(2 sigma^2)) ) / (alpha-1)`
///
/// evaluated in log space.
pub fn sgm_rdp(q: f64, sigma: f64, alpha: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("sample rate must lie in [0, 1], got {q}")));
    }
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::Domain(format!("sigma must be non-negative, got {sigma}")));
    }
    if alpha < 2 {
        return Err(Error::Domain(format!("order must be an integer >= 2, got {alpha}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if sigma == 0.0 {
        return Ok(f64::INFINITY);
    }
    let a = alpha as f64;
    let log_q = q.ln();
    let log_1mq = (-q).ln_1p();
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let mut log_binom = 0.0;
    let mut acc = f64::NEG_INFINITY;
    for k in 0..=alpha {
        if k > 0 {
            log_binom += ((alpha - k + 1) as f64).ln() - (k as f64).ln();
        }
        let kf = k as f64;
        let rest = (alpha - k) as f64;
        let mut term = log_binom + kf * log_q + (kf * kf - kf) * inv_two_var;
        if rest > 0.0 {
            term += rest * log_1mq;
        }
        acc = log_add_exp(acc, term);
    }
    Ok((acc / (a - 1.0)).max(0.0))
}

/// Per-order RDP values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    orders: Vec<u32>,
    values: Vec<f64>,
}

impl RdpCurve {
    pub fn sampled_gaussian(q: f64, sigma: f64, orders: &[u32]) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::Config("empty RDP order grid".into()));
        }
        if orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("RDP orders must be strictly increasing".into()));
        }
        let values = orders
            .iter()
            .map(|&a| sgm_rdp(q, sigma, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            orders: orders.to_vec(),
            values,
        })
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// RDP composes additively: `steps` identical steps scale every value by `steps`.
    pub fn compose(&self, steps: u64) -> RdpCurve {
        let t = steps as f64;
        RdpCurve {
            orders: self.orders.clone(),
            values: self.values.iter().map(|v| v * t).collect(),
        }
    }

    /// `min_alpha [ rdp(alpha) + log(1/delta)/(alpha-1) ]` and its minimizing order.
    pub fn to_dp(&self, delta: f64) -> Result<(f64, u32)> {
        check_delta(delta)?;
        let log_inv_delta = (1.0 / delta).ln();
        let mut best = (f64::INFINITY, self.orders[0]);
        for (&a, &v) in self.orders.iter().zip(&self.values) {
            let eps = v + log_inv_delta / (a as f64 - 1.0);
            if eps < best.0 {
                best = (eps, a);
            }
        }
        Ok(best)
    }
}

/// Parameters of a DP-SGD run as seen by the accountant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdPrivacySpec {
    pub q: f64,
    pub sigma: f64,
    pub steps: u64,
    pub delta: f64,
}

impl SgdPrivacySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Domain(format!("sample rate must lie in (0, 1], got {}", self.q)));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.steps == 0 {
            return Err(Error::Domain("step count must be at least 1".into()));
        }
        check_delta(self.delta)
    }
}

/// Epsilon spent by `spec.steps` Poisson-subsampled Gaussian steps, with the minimizing order.
pub fn sgd_epsilon(spec: &SgdPrivacySpec, orders: &[u32]) -> Result<(f64, u32)> {
    spec.validate()?;
    RdpCurve::sampled_gaussian(spec.q, spec.sigma, orders)?
        .compose(spec.steps)
        .to_dp(spec.delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sigma: f64,
    pub eps_achieved: f64,
    pub alpha_star: u32,
}

/// Bisection for the noise multiplier whose DP-SGD epsilon lands in
/// `[eps_target * (1 - 1e-4), eps_target]`.
///
/// If even the smallest sigma in the bracket meets the target, that sigma is returned.
pub fn calibrate_sigma(eps_target: f64, delta: f64, q: f64, steps: u64, orders: &[u32]) -> Result<Calibration> {
    if !(eps_target.is_finite() && eps_target > 0.0) {
        return Err(Error::Domain(format!(
            "calibration target must be finite and positive, got {eps_target}"
        )));
    }
    let eval = |sigma: f64| sgd_epsilon(&SgdPrivacySpec { q, sigma, steps, delta }, orders);
    let (mut lo, mut hi) = SIGMA_BRACKET;
    let (eps_lo, alpha_lo) = eval(lo)?;
    let (eps_hi, alpha_hi) = eval(hi)?;
    if eps_hi > eps_target {
        return Err(Error::Calibration {
            target: eps_target,
            sigma_low: lo,
            sigma_high: hi,
            eps_at_low: eps_lo,
            eps_at_high: eps_hi,
        });
    }
    if eps_lo <= eps_target {
        return Ok(Calibration {
            sigma: lo,
            eps_achieved: eps_lo,
            alpha_star: alpha_lo,
        });
    }
    let floor = eps_target * (1.0 - CALIBRATION_REL_TOL);
    let mut best = (eps_hi, alpha_hi);
    for _ in 0..MAX_BISECTIONS {
        if best.0 >= floor {
            break;
        }
        let mid = (lo * hi).sqrt();
        let (eps, alpha) = eval(mid)?;
        if eps <= eps_target {
            hi = mid;
            best = (eps, alpha);
        } else {
            lo = mid;
        }
    }
    Ok(Calibration {
        sigma: hi,
        eps_achieved: best.0,
        alpha_star: best.1,
    })
}
