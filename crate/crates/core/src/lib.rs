//! Locally differentially private federated learning under model poisoning:
//! data preparation, an MLP regressor, the Gaussian mechanism, the federated
//! orchestrator, the adaptive attacker, aggregator-side detectors and the
//! Q-learning privacy-level selector.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod data;
pub mod detection;
pub mod dp;
pub mod error;
pub mod federation;
pub mod model;
pub mod rdp;
pub mod rng;

pub use error::{Error, Result};
