//! Deterministic federated-learning simulator for a clinical linear SVM
//! with distributed differential privacy.
//!
//! The pipeline: a tabular dataset (UCI `breast-cancer-wisconsin.data`
//! format) is cleaned, normalized, and sharded across simulated clinics.
//! Each round, clients train locally on the hinge objective, clip their
//! update, add a share of Gaussian "mix-up" noise, and ship the noisy
//! delta to the server. The server averages, tops up noise if some
//! clients dropped out, and charges an (ε, δ) accountant. On top of the
//! training loop sit a backdoor data-poisoning attack, an
//! adversarial-training defense, and a config-driven benchmark runner
//! that sweeps privacy budgets and client counts into a CSV.

pub mod adversary;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod federation;
pub mod privacy;
pub mod seed;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
