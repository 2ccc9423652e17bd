//! Exact total-correlation computation, Donsker-Varadhan lower-bound
//! estimation, and total-correlation-maximizing multimodal classification
//! losses, verified end to end against brute-force oracles on small discrete
//! distributions and synthetic two-modality data.
//!
//! Modules, bottom-up:
//! - [`prob`]: dense joint tables; entropy, MI, TC, KL, JS, Gibbs reweighting.
//! - [`nn`]: dense nets with manual reverse-mode gradients, SGD, log-sum-exp.
//! - [`estimators`]: DV-bound evaluation and critic fitting (tabular/neural).
//! - [`losses`]: joint CE, unimodal ensemble, the pairwise/sampled/factored
//!   TC-maximizing losses, the regression variant, and the prediction rule.
//! - [`synth`]: seeded two-modality data generators with exact ground truth.
//! - [`trainer`]: training loops and evaluation metrics.
//! - [`verify`]: the executable identity/inequality suite behind `verify`.
//! - [`cli`]: the `tcmax` command-line entry points.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod losses;
pub mod nn;
pub mod prob;
pub mod synth;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
