//! Small fully connected networks with hand-written backpropagation,
//! per-example gradients, DP-SGD aggregation and Adam.

mod adam;
mod dpsgd;
mod loss;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use dpsgd::{batch_grads, batch_losses_and_grads, clip_to_norm, dp_step, DpSgdConfig};
pub use loss::{example_loss, per_example_grad, per_example_loss_and_grad, Example, PenaltyStyle};
pub use mlp::{Checkpoint, Head, Mlp, Trace, LEAKY_SLOPE, LOGIT_CLAMP};

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
