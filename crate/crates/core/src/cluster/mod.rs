//! k-means, optimal assignment, and clustering / segmentation metrics.

mod hungarian;
mod kmeans;
mod metrics;

pub use hungarian::{hungarian, Assignment};
pub use kmeans::{assign_to_centroids, kmeans, ClusterAssignment, KMeansParams};
pub use metrics::{
    class_mapping, clustering_accuracy, confusion, iou_scores, nmi, recall_scores, MaskScores,
    SegCounts,
};
