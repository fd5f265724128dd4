//! Visual descriptors of terrain patches and cross-modal triplet formation.

mod descriptor;
mod sampling;

pub use descriptor::{descriptor_window, visual_features, visual_features_batch, FEATURE_DIM};
pub use sampling::{
    cluster_visual, corrupt_triplets, sample_triplets, triplet_correctness, Guide, NegativeRule,
    PositiveRule, SamplingMechanism, Triplet,
};
