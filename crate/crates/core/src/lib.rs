//! Differentially private modeling of a private feature distribution with
//! help from a public feature pool.
//!
//! * [`mge`]: private diagonal-Gaussian fit (Gaussian mechanism).
//! * [`dre`]: private density-ratio discriminator trained with DP-SGD, used to
//!   reweight and resample the public pool.
//! * [`gan`]: DP-trained latent-space WGAN baseline.
//! * [`accountant`]: Gaussian-mechanism and sampled-Gaussian RDP calibration.
//! * [`metrics`]: feature-space FID, PRD precision/recall and NDB.
//! * [`harness`]: synthetic feature oracle and the experiment runner.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod budget;
pub mod dre;
pub mod error;
pub mod features;
pub mod gan;
pub mod harness;
pub mod metrics;
pub mod mge;
pub mod nn;
pub mod rng;

pub use budget::PrivacyBudget;
pub use error::{Error, Result};
pub use features::{FeatureFormat, FeatureMatrix};
pub use rng::SeededRng;

/// Hex SHA-256 of a serializable value's JSON form, truncated to 16 characters.
pub(crate) fn json_fingerprint<T: serde::Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(&Sha256::digest(&bytes)[..8])
}
