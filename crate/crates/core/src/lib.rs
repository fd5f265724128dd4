//! Self-supervised terrain classification from vehicle-terrain interaction
//! sounds: spectrograms, cross-modal triplet metric learning, weak labeling
//! of birds-eye imagery, per-pixel terrain segmentation, and terrain-aware
//! path planning over a fused semantic map.
//!
//! A reproducible synthetic world generator ([`synthgen`]) stands in for
//! recorded robot data.

pub mod audio;
pub mod bundle;
pub mod checkpoint;
pub mod cluster;
mod error;
pub mod exec;
pub mod geometry;
pub mod gradcheck;
pub mod imagery;
pub mod io;
pub mod mapplan;
pub mod metric;
pub mod pipeline;
pub mod seed;
pub mod seg;
pub mod synthgen;
pub mod triplets;

pub use error::{Error, Result};
pub use exec::Exec;
