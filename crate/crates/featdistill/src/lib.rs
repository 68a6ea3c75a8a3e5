//! Robustness-oriented detector of AI-generated images.
//!
//! The library covers the full desk-scale pipeline: a seeded degradation
//! catalog, feature extraction over pluggable backbones, a two-stage
//! classification + distillation trainer, a soft-voting ensemble, and a
//! robust ROC-AUC evaluation harness. Everything is deterministic given the
//! configured seeds; all floating-point model math runs in `f64`.

pub mod dataset;
pub mod ensemble;
pub mod distortion;
pub mod error;
pub mod features;
pub mod image;
pub mod metrics;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
