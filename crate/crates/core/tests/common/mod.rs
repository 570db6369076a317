//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the code paths it is used to check: gradients are
//! compared against central differences of forward passes, RDP values against
//! exact rational sums, and sensitivities against brute-force neighbor search.

#![allow(dead_code)]

use dpfeat::mge::moments;
use dpfeat::nn::{example_loss, Example, Head, Mlp, PenaltyStyle};
use dpfeat::{FeatureMatrix, SeededRng};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Hidden pre-activations closer than this to zero are treated as kinks.
pub const KINK_MARGIN: f64 = 1e-3;

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||a - b|| / max(||b||, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&diff) / l2(b).max(floor)
}

pub fn random_point(d: usize, rng: &mut SeededRng) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let r = 0.95 * rng.uniform().powf(1.0 / d as f64) / l2(&v);
    v.into_iter().map(|x| x * r).collect()
}

pub fn random_unit(d: usize, rng: &mut SeededRng) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let n = l2(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Central-difference gradient of the example loss with respect to the parameters.
pub fn fd_param_grad(mlp: &Mlp, ex: &Example, h: f64) -> Vec<f64> {
    let mut probe = mlp.clone();
    (0..mlp.num_params())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = example_loss(&probe, ex).unwrap();
            probe.params_mut()[i] = orig - h;
            let down = example_loss(&probe, ex).unwrap();
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference gradient of the scalar network output with respect to the input.
pub fn fd_input_grad(mlp: &Mlp, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = mlp.forward_scalar(&p).unwrap();
            p[i] = x[i] - h;
            let down = mlp.forward_scalar(&p).unwrap();
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Smallest |hidden pre-activation| over the given inputs.
pub fn kink_distance(mlp: &Mlp, inputs: &[&[f64]]) -> f64 {
    let hidden = mlp.layer_dims().len() - 2;
    inputs
        .iter()
        .flat_map(|x| {
            let t = mlp.trace(x).unwrap();
            t.pre[..hidden].iter().flatten().map(|z| z.abs()).collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Which gradient a random check exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradKind {
    Dre,
    CriticLiteral,
    CriticStandard,
    Input,
}

pub const GRAD_KINDS: [GradKind; 4] = [
    GradKind::Dre,
    GradKind::CriticLiteral,
    GradKind::CriticStandard,
    GradKind::Input,
];

/// One randomized analytic-vs-finite-difference comparison. Networks and
/// inputs are redrawn until no hidden unit sits within `KINK_MARGIN` of its
/// kink, where a central difference is not a derivative estimate.
pub fn gradient_check(kind: GradKind, rng: &mut SeededRng) -> f64 {
    loop {
        let d = 2 + rng.index(6);
        let w = 2 + rng.index(7);
        let a = random_point(d, rng);
        let b = random_point(d, rng);
        let t = rng.uniform();
        let (dims, head): (Vec<usize>, Head) = match kind {
            GradKind::Dre => (vec![d, w, 1], Head::Sigmoid),
            _ => (vec![d, w, w, w, 1], Head::Identity),
        };
        let key = rng.index(1 << 30) as u64;
        let mlp = Mlp::glorot(&dims, head, &mut rng.split(key)).unwrap();
        let interp: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        if kink_distance(&mlp, &[&a, &b, &interp]) < KINK_MARGIN {
            continue;
        }
        return match kind {
            GradKind::Input => {
                let g = mlp.grad_wrt_input(&a).unwrap();
                rel_err(&g, &fd_input_grad(&mlp, &a, FD_STEP), 1e-6)
            }
            _ => {
                let ex = match kind {
                    GradKind::Dre => Example::Dre {
                        private: &a,
                        public: &b,
                    },
                    GradKind::CriticLiteral => Example::Critic {
                        real: &a,
                        fake: &b,
                        penalty: PenaltyStyle::Literal,
                        t,
                    },
                    _ => Example::Critic {
                        real: &a,
                        fake: &b,
                        penalty: PenaltyStyle::Standard { lambda: 10.0 },
                        t,
                    },
                };
                let g = dpfeat::nn::per_example_grad(&mlp, &ex).unwrap();
                rel_err(&g, &fd_param_grad(&mlp, &ex, FD_STEP), 1e-6)
            }
        };
    }
}

/// Exact rational value of `sum_k C(a,k) (1-q)^(a-k) q^k r^(k^2-k)`, which is
/// the sampled-Gaussian moment when `r = exp(1 / (2 sigma^2))`.
pub fn sgm_moment_exact(q: &BigRational, r: &BigRational, alpha: u32) -> BigRational {
    let one = BigRational::one();
    let p = &one - q;
    let mut binom = BigInt::one();
    let mut total = BigRational::zero();
    for k in 0..=alpha {
        if k > 0 {
            binom = binom * BigInt::from(alpha - k + 1) / BigInt::from(k);
        }
        let e = (k as u64) * (k as u64) - k as u64;
        let term = BigRational::from_integer(binom.clone())
            * num_traits::pow(p.clone(), (alpha - k) as usize)
            * num_traits::pow(q.clone(), k as usize)
            * num_traits::pow(r.clone(), e as usize);
        total += term;
    }
    total
}

fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        let f: f64 = x.to_string().parse().unwrap();
        return f.ln();
    }
    let shift = bits - 60;
    let top: BigUint = x >> shift;
    let f: f64 = top.to_string().parse().unwrap();
    f.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_rational(x: &BigRational) -> f64 {
    assert!(x.is_positive());
    ln_biguint(x.numer().magnitude()) - ln_biguint(x.denom().magnitude())
}

/// Largest per-statistic L2 change of (mean, mean of squares) found by
/// replacing one row of random unit-ball datasets. Candidate replacements
/// include antipodal unit vectors, which attain the bound.
pub fn max_moment_sensitivity(pairs: usize, n: usize, d: usize, rng: &mut SeededRng) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for p in 0..pairs {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                if rng.uniform() < 0.5 {
                    random_unit(d, rng)
                } else {
                    random_point(d, rng)
                }
            })
            .collect();
        let i = rng.index(n);
        let replacement = match p % 3 {
            0 => rows[i].iter().map(|x| -x).collect(),
            1 => {
                let mut e = vec![0.0; d];
                e[rng.index(d)] = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
                e
            }
            _ => random_unit(d, rng),
        };
        let mut rows2 = rows.clone();
        rows2[i] = replacement;
        let (m1, s1) = moments(&FeatureMatrix::from_rows(&rows).unwrap());
        let (m2, s2) = moments(&FeatureMatrix::from_rows(&rows2).unwrap());
        let dm: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| a - b).collect();
        let ds: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a - b).collect();
        worst.0 = worst.0.max(l2(&dm));
        worst.1 = worst.1.max(l2(&ds));
    }
    worst
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Log of fitted over analytic density ratio on a 0.01 grid over [-0.2, 0.7],
/// for a non-private discriminator trained on N(0, 0.1^2) private against
/// N(0.5, 0.1^2) public samples (`n` of each). Also returns the analytic
/// log-ratio at each grid point.
pub fn one_d_log_ratio_errors(n: usize, iters: u64, seed: u64) -> (Vec<(f64, f64)>, Vec<f64>) {
    use dpfeat::dre::{train_dp_dre, DreConfig};
    use dpfeat::nn::DpSgdConfig;
    use dpfeat::PrivacyBudget;

    let rng = SeededRng::new(seed, 0);
    let draw = |mu: f64, rng: &mut SeededRng| {
        let data: Vec<f64> = (0..n).map(|_| (mu + 0.1 * rng.normal()).clamp(-1.0, 1.0)).collect();
        FeatureMatrix::new(1, data, None).unwrap()
    };
    let private = draw(0.0, &mut rng.split(0));
    let public = draw(0.5, &mut rng.split(1));
    let cfg = DreConfig {
        sgd: DpSgdConfig {
            iters,
            ..DpSgdConfig::default()
        },
        ..DreConfig::default()
    };
    let disc = train_dp_dre(
        &private,
        &public,
        &PrivacyBudget::non_private(1e-5),
        &cfg,
        &mut rng.split(2),
    )
    .unwrap();
    let mut errs = Vec::new();
    let mut truth = Vec::new();
    for i in 0..=90 {
        let v = -0.2 + 0.01 * i as f64;
        let log_true = (-(v * v) + (v - 0.5) * (v - 0.5)) / (2.0 * 0.01);
        errs.push((v, disc.density_ratio(&[v]).unwrap().ln() - log_true));
        truth.push(log_true);
    }
    (errs, truth)
}
