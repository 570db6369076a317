//! Density-ratio discriminator against closed-form ratios.

mod common;

use std::collections::BTreeSet;

use common::*;
use dpfeat::dre::{compute_weights, superclass_weight, train_dp_dre, DreConfig};
use dpfeat::harness::{gen_synthetic, OracleConfig};
use dpfeat::nn::DpSgdConfig;
use dpfeat::{PrivacyBudget, SeededRng};

fn dre_cfg(iters: u64) -> DreConfig {
    DreConfig {
        sgd: DpSgdConfig {
            iters,
            ..DpSgdConfig::default()
        },
        ..DreConfig::default()
    }
}

/// Where both Gaussians put appreciable mass the fitted ratio tracks the
/// closed form. The tails are covered by the acceptance suite.
#[test]
fn recovers_one_d_ratio_where_both_classes_have_support() {
    let (errs, _) = one_d_log_ratio_errors(200_000, 30_000, 0);
    let worst = errs
        .iter()
        .filter(|(v, _)| (0.1..=0.4).contains(v))
        .map(|(_, e)| e.abs())
        .fold(0.0, f64::max)
        .exp();
    assert!(worst <= 1.5, "worst factor {worst}");
}

#[test]
fn identical_distributions_give_half() {
    let cfg = OracleConfig {
        d: 8,
        n_pub: 4000,
        n_priv: 4000,
        modes: 4,
        private_modes: vec![0, 1, 2, 3],
        ..OracleConfig::default()
    };
    let data = gen_synthetic(&cfg, &mut SeededRng::new(3, 0)).unwrap();
    let disc = train_dp_dre(
        &data.private,
        &data.public,
        &PrivacyBudget::non_private(1e-5),
        &dre_cfg(3000),
        &mut SeededRng::new(3, 1),
    )
    .unwrap();
    let held_out = gen_synthetic(&cfg, &mut SeededRng::new(4, 0)).unwrap().public;
    let dev: Vec<f64> = held_out.rows().map(|v| (disc.d(v).unwrap() - 0.5).abs()).collect();
    assert!(mean(&dev) <= 0.1, "mean |D - 0.5| = {}", mean(&dev));

    // Superclass mass of any label set approaches its public frequency.
    let w = compute_weights(&disc, &data.public).unwrap();
    let labels = data.public.labels().unwrap();
    for set in [vec![0u32], vec![1, 2], vec![0, 2, 3]] {
        let target: BTreeSet<u32> = set.iter().copied().collect();
        let freq = labels.iter().filter(|l| target.contains(l)).count() as f64 / labels.len() as f64;
        let mass = superclass_weight(&w, Some(labels), &target).unwrap();
        assert!((mass - freq).abs() <= 0.05, "{set:?}: {mass} vs {freq}");
    }
}

#[test]
fn private_training_is_deterministic_and_accounts_every_round() {
    let cfg = OracleConfig {
        d: 4,
        n_pub: 500,
        n_priv: 40,
        modes: 2,
        private_modes: vec![1],
        ..OracleConfig::default()
    };
    let data = gen_synthetic(&cfg, &mut SeededRng::new(8, 0)).unwrap();
    let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
    let mut dcfg = dre_cfg(300);
    // q = 1/40: many rounds draw an empty private batch.
    dcfg.sgd.batch = 1;
    let a = train_dp_dre(&data.private, &data.public, &budget, &dcfg, &mut SeededRng::new(9, 0)).unwrap();
    let b = train_dp_dre(&data.private, &data.public, &budget, &dcfg, &mut SeededRng::new(9, 0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.steps, 300);
    assert!(a.noisy_updates < a.steps && a.noisy_updates > 0);
    let spec = dpfeat::accountant::SgdPrivacySpec {
        q: 1.0 / 40.0,
        sigma: a.sigma,
        steps: 300,
        delta: 1e-5,
    };
    let (eps, _) = dpfeat::accountant::sgd_epsilon(&spec, &dpfeat::accountant::default_orders()).unwrap();
    assert_eq!(eps, a.eps_achieved);
    assert!(eps <= 1.0);
}
