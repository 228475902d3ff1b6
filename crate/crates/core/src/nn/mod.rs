//! Micro segmentation network with hand-derived gradients.

pub mod batchnorm;
pub mod conv;
mod gemm;
mod net;
pub mod upsample;

pub use net::{ForwardCache, Gradients, LayerStats, Mode, SegNet};
