//! End-to-end flow from raw clips and views to clusters, weak labels, a
//! trained segmenter and its scores. Every stage is a plain function over
//! in-memory data so the CLI can persist artifacts between stages and tests
//! can run the whole chain without touching disk.

mod config;
mod dataset;
mod stages;

pub use config::{PipelineConfig, WorldPreset};
pub use dataset::{simulate, Dataset, Truth, CAMERA_HEIGHT_M};
pub use stages::{
    audio_inputs, best_patches, cluster_embeddings, cluster_to_class, encoder_triplets, evaluate_segmentation, form_triplets, label_clips,
    noisy_clips, path_views, run, segmentation_labels, streams, train_encoder, triplets_from_features, weak_label_views, RunOptions,
    RunReport, SegEvaluation, TripletStage,
};
