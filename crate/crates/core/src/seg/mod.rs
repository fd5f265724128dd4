//! Per-pixel terrain classifier trained on weak path labels with a
//! class-weighted cross-entropy that ignores background pixels.

mod loss;
mod model;

pub use loss::{class_weights, softmax_rows, weighted_ce, weighted_ce_logits, WeightedCe};
pub use model::{
    labeled_histogram, pixel_feature, pixel_features, predict_mask, seg_loss_and_grad, train_segmenter,
    Prediction, SegConfig, SegModel, SegTrainOutput, NEIGHBORHOOD,
};
