//! Style transfer between clients: Fourier amplitude interpolation (CFSI)
//! and LAB statistics matching.

pub mod bank;
pub mod cfsi;
pub mod fft;
pub mod lab;
pub mod policy;

pub use bank::{build_banks, StyleBanks};
pub use cfsi::cfsi_translate;
pub use fft::{fft2_decompose, fft2_recompose};
pub use lab::{lab_to_rgb, lab_translate, rgb_to_lab};
pub use policy::{apply_style_policy, StyleMethod, StylePolicy};
