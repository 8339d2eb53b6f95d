//! Hard-sample-mining contrastive feature learning for imbalanced tabular
//! fault diagnosis.
//!
//! The pipeline trains an encoder with a supervised contrastive loss on
//! mined mini-batches, then trains a classifier on the frozen encoder's
//! outputs with mini-batches seeded from its own mistakes.

pub mod dataio;
pub mod error;
pub mod exec;
pub mod hsm;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod supcon;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
