//! Touch-stroke continuous authentication toolkit.
//!
//! Per-user authentication models are trained from swipe gestures in two
//! architectures: a vanilla pipeline (`V`) and the same pipeline augmented
//! with synthetic genuine and impostor windows drawn from a pair of GANs
//! (`G`). Trained models can then be attacked with zero-effort, population
//! and random-vector impostor streams and scored with FAR/FRR/HTER.
//!
//! Stage order inside [`pipeline`]:
//!
//! ```text
//! swipes -> features -> windows -> normalizer -> MI selector
//!        -> [G: dual GAN augmentation] -> ADASYN -> classifier -> EER threshold
//! ```

pub mod attacks;
pub mod balancing;
pub mod classifiers;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod gan;
pub mod nn;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};

/// Toolkit version recorded in manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
