//! Trajectory projection into image coordinates, birds-eye homographies,
//! footprint rasterization into weak labels, and terrain patch extraction.

mod camera;
mod patches;
mod raster;

pub use camera::{project_trajectory, CameraModel, DropReason, Homography, Pose, ProjectedPath};
pub use patches::{extract_patches, PatchExtraction, PatchSkip, TerrainPatch};
pub use raster::{
    clip_segments, rasterize_path, rasterize_segments, stroke_half_width_px, weak_label_image,
    PathRaster, PathSample, Segment, WeakLabelImage, FOOTPRINT_RADIUS_M,
};

/// Default birds-eye resolution.
pub const DEFAULT_METERS_PER_PIXEL: f64 = 0.05;
/// Default side of the square terrain patches.
pub const DEFAULT_PATCH_PX: usize = 10;

use crate::imagery::RgbImage;

/// Birds-eye image together with the pose of the view it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct BirdsEyeView {
    pub image: RgbImage,
    pub frame_pose: Pose,
}
