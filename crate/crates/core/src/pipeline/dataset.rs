use nalgebra::{Point2, Point3};

use crate::audio::AudioClip;
use crate::geometry::{project_trajectory, BirdsEyeView, CameraModel, Pose};
use crate::imagery::LabelMask;
use crate::synthgen::{dense_truth, generate_world, plan_tour, simulate_traversal, TraversalParams, World, WorldSpec};
use crate::Result;

/// Training-facing recording: audio, poses and views, no class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub clips: Vec<AudioClip>,
    /// One pose per clip, at the clip midpoint.
    pub poses: Vec<Pose>,
    pub views: Vec<BirdsEyeView>,
    /// Pose row each view was taken at.
    pub view_pose: Vec<usize>,
    pub meters_per_pixel: f64,
    pub camera_height_m: f64,
}

/// Held-out labels, only read by evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub num_classes: usize,
    pub clip_classes: Vec<usize>,
    /// Dense encoded class mask per view (void outside the world).
    pub dense: Vec<LabelMask>,
}

/// Nadir camera height used for every view.
pub const CAMERA_HEIGHT_M: f64 = 2.0;

impl Dataset {
    pub fn camera(&self, view: usize) -> Result<CameraModel> {
        let img = &self.views[view].image;
        CameraModel::birds_eye(img.width, img.height, self.meters_per_pixel, self.camera_height_m)
    }

    /// Clip midpoints in image coordinates of `view`, in clip order.
    pub fn projected_midpoints(&self, view: usize) -> Result<Vec<(usize, Point2<f64>)>> {
        let pts: Vec<Point3<f64>> = self
            .poses
            .iter()
            .map(|p| Point3::new(p.position.x, p.position.y, 0.0))
            .collect();
        let camera = self.camera(view)?;
        Ok(project_trajectory(&pts, &camera, &self.views[view].frame_pose).points)
    }
}

/// Generates a world and drives `n_clips` clips through it.
pub fn simulate(spec: &WorldSpec, n_clips: usize, speed_range: (f64, f64), params: &TraversalParams) -> Result<(World, Dataset, Truth)> {
    let world = generate_world(spec)?;
    let tour = plan_tour(&world, n_clips, params.clip_seconds, speed_range, spec.seed)?;
    let mut params = params.clone();
    params.max_clips = Some(n_clips);
    let rec = simulate_traversal(&world, &tour.waypoints, &tour.speeds, &params)?;
    let mpp = world.meters_per_pixel();
    let dense = rec
        .images
        .iter()
        .map(|v| dense_truth(&world, &v.frame_pose, params.image_size_px, mpp))
        .collect();
    let truth = Truth {
        num_classes: spec.num_classes,
        clip_classes: rec.true_class_per_clip,
        dense,
    };
    let ds = Dataset {
        clips: rec.clips,
        poses: rec.poses,
        views: rec.images,
        view_pose: rec.image_clip,
        meters_per_pixel: mpp,
        camera_height_m: CAMERA_HEIGHT_M,
    };
    Ok((world, ds, truth))
}
