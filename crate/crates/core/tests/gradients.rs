//! Analytic per-example gradients against central finite differences.

mod common;

use common::*;
use dpfeat::nn::{per_example_grad, Example, Head, Mlp, PenaltyStyle};
use dpfeat::SeededRng;

fn worst(kind: GradKind, trials: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed, 0);
    (0..trials).map(|_| gradient_check(kind, &mut rng)).fold(0.0, f64::max)
}

#[test]
fn dre_gradients_match_finite_differences() {
    let e = worst(GradKind::Dre, 50, 1);
    assert!(e <= FD_REL_TOL, "worst relative error {e}");
}

#[test]
fn critic_gradients_with_literal_penalty() {
    let e = worst(GradKind::CriticLiteral, 50, 2);
    assert!(e <= FD_REL_TOL, "worst relative error {e}");
}

#[test]
fn critic_gradients_with_standard_penalty() {
    let e = worst(GradKind::CriticStandard, 50, 3);
    assert!(e <= FD_REL_TOL, "worst relative error {e}");
}

#[test]
fn input_gradients() {
    let e = worst(GradKind::Input, 50, 4);
    assert!(e <= FD_REL_TOL, "worst relative error {e}");
}

#[test]
fn saturated_logit_has_zero_gradient_past_clamp() {
    // Output bias far beyond the clamp: the loss is flat in every parameter.
    let mut mlp = Mlp::zeros(&[2, 3, 1], Head::Sigmoid).unwrap();
    let n = mlp.num_params();
    mlp.params_mut()[n - 1] = 100.0;
    let ex = Example::Dre {
        private: &[0.1, 0.2],
        public: &[0.3, -0.1],
    };
    let g = per_example_grad(&mlp, &ex).unwrap();
    let fd = fd_param_grad(&mlp, &ex, FD_STEP);
    assert!(g.iter().chain(&fd).all(|x| x.abs() < 1e-12), "{g:?} {fd:?}");
}

#[test]
fn linear_critic_literal_penalty_gradient() {
    // D(x) = w.x + b (single layer): the penalty ||w|| has gradient w/||w||.
    let mlp = Mlp::from_params(&[3, 1], Head::Identity, vec![3.0, 0.0, 4.0, 0.5]).unwrap();
    let real = [0.1, 0.2, 0.3];
    let fake = [-0.2, 0.0, 0.1];
    let g = per_example_grad(
        &mlp,
        &Example::Critic {
            real: &real,
            fake: &fake,
            penalty: PenaltyStyle::Literal,
            t: 0.5,
        },
    )
    .unwrap();
    let expect = [0.1 + 0.2 + 0.6, 0.2, 0.3 - 0.1 + 0.8, 0.0];
    for (a, b) in g.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{g:?}");
    }
}
