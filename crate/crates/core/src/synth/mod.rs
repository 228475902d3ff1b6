//! Synthetic driving scenes with controllable style and layout shift.

pub mod augment;
pub mod domain;
pub mod io;
pub mod scene;
pub mod split;

pub use augment::{apply_augment, augment_train, AugmentParams};
pub use domain::{DomainSpec, Layout, Setting, Weather, NUM_CLASSES};
pub use scene::generate_scene;
pub use split::{make_split, FederatedData, SplitConfig, SplitMode};
