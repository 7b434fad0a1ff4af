//! RegularGPT and the vanilla baseline.

pub mod checkpoint;
pub mod config;
pub mod mask;
pub mod transformer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, Manifest};
pub use config::{Arch, ModelConfig};
pub use mask::{adaptive_depth, checked_depth, dilated_bias, dilated_pattern, dilated_slot, pad_input};
pub use transformer::{argmax, AttentionRoute, BucketTrace, ForwardTrace, Model, Sublayer};
