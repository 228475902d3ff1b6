//! Desk-scale federated semantic segmentation.
//!
//! A micro segmentation network trained with hand-derived gradients, a
//! federated round loop with pluggable server optimizers, batch-norm
//! statistic strategies (share all, FedBN, SiloBN, AdaBN), Fourier and LAB
//! style augmentation, and a procedural driving-scene generator with
//! controllable style and layout shift.

pub mod bn_strategy;
pub mod config;
pub mod container;
pub mod data;
pub mod error;
pub mod fed;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod style;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
