use nalgebra::{Isometry3, Matrix3, Point2, Point3, Quaternion, Translation3, UnitQuaternion, Vector3};

use crate::imagery::{RgbImage, VOID_RGB};
use crate::{Error, Result};

/// Robot pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub timestamp_s: f64,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    /// Builds a pose from raw quaternion components, which must already be
    /// unit length to 1e-9.
    pub fn from_components(
        timestamp_s: f64,
        position: [f64; 3],
        quat_xyzw: [f64; 4],
    ) -> Result<Self> {
        let [qx, qy, qz, qw] = quat_xyzw;
        let q = Quaternion::new(qw, qx, qy, qz);
        let norm = q.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("quaternion norm {norm} is not 1")));
        }
        Ok(Self {
            timestamp_s,
            position: Vector3::from(position),
            orientation: UnitQuaternion::new_unchecked(q),
        })
    }

    pub fn planar(timestamp_s: f64, x: f64, y: f64, yaw: f64) -> Self {
        Self {
            timestamp_s,
            position: Vector3::new(x, y, 0.0),
            orientation: UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
        }
    }

    /// Same position with the orientation dropped: the frame used by the
    /// gravity-aligned, north-up birds-eye camera.
    pub fn north_up(&self) -> Self {
        Self {
            orientation: UnitQuaternion::identity(),
            ..*self
        }
    }

    /// Transform taking world coordinates into this pose's body frame.
    pub fn body_from_world(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation).inverse()
    }

    pub fn quat_xyzw(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.i, q.j, q.k, q.w]
    }
}

/// Planar projective transform on pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(pub Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    /// `None` when the homogeneous scale is degenerate (|w| < 1e-12).
    pub fn apply(&self, p: Point2<f64>) -> Option<Point2<f64>> {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        (v.z.abs() >= 1e-12).then(|| Point2::new(v.x / v.z, v.y / v.z))
    }

    pub fn inverse(&self) -> Option<Homography> {
        self.0.try_inverse().map(Homography)
    }

    /// Resamples `src` into a `width x height` image so that output pixel
    /// `q` takes the source pixel at `self^-1 * q` (nearest neighbour).
    /// Pixels mapping outside the source are void.
    pub fn warp_image(&self, src: &RgbImage, width: usize, height: usize) -> Result<RgbImage> {
        let inv = self
            .inverse()
            .ok_or_else(|| Error::input("homography is not invertible"))?;
        let mut out = RgbImage::new(width, height);
        for y in 0..height {
            for x in 0..width {
                let q = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                let rgb = inv
                    .apply(q)
                    .and_then(|p| {
                        let (sx, sy) = (p.x.floor(), p.y.floor());
                        (sx >= 0.0 && sy >= 0.0 && (sx as usize) < src.width && (sy as usize) < src.height)
                            .then(|| src.pixel(sx as usize, sy as usize))
                    })
                    .unwrap_or(VOID_RGB);
                out.set_pixel(x, y, rgb);
            }
        }
        Ok(out)
    }
}

/// Intrinsics, birds-eye perspective warp, and camera mounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Matrix3<f64>,
    pub perspective: Matrix3<f64>,
    /// Rigid transform from the robot body frame into the camera frame.
    pub camera_from_robot: Isometry3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    BehindCamera,
    Degenerate,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectedPath {
    /// `(input index, pixel)` for every point that projected cleanly.
    pub points: Vec<(usize, Point2<f64>)>,
    pub dropped: Vec<(usize, DropReason)>,
}

impl CameraModel {
    pub fn new(
        intrinsics: Matrix3<f64>,
        perspective: Matrix3<f64>,
        camera_from_robot: Isometry3<f64>,
    ) -> Result<Self> {
        let k = &intrinsics;
        let upper = k[(1, 0)] == 0.0 && k[(2, 0)] == 0.0 && k[(2, 1)] == 0.0;
        if !upper || k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 {
            return Err(Error::input(
                "intrinsics must be upper-triangular with positive focal lengths",
            ));
        }
        if perspective.determinant().abs() < 1e-12 {
            return Err(Error::input("perspective matrix is not invertible"));
        }
        Ok(Self {
            intrinsics,
            perspective,
            camera_from_robot,
        })
    }

    /// Virtual nadir camera `height_m` above the robot, looking straight
    /// down, image rows pointing south. One pixel covers
    /// `meters_per_pixel` on the ground and the robot sits at the image
    /// center.
    pub fn birds_eye(width: usize, height: usize, meters_per_pixel: f64, height_m: f64) -> Result<Self> {
        if meters_per_pixel <= 0.0 || height_m <= 0.0 {
            return Err(Error::input("birds-eye camera needs positive resolution and height"));
        }
        let f = height_m / meters_per_pixel;
        let k = Matrix3::new(f, 0.0, width as f64 / 2.0, 0.0, f, height as f64 / 2.0, 0.0, 0.0, 1.0);
        // x_cam = east, y_cam = south, z_cam = down
        let rot = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0),
        ));
        let mount = Isometry3::from_parts(Translation3::new(0.0, 0.0, height_m), rot);
        Self::new(k, Matrix3::identity(), mount)
    }

    /// World-to-camera transform for an image taken at `frame_pose`.
    pub fn camera_from_world(&self, frame_pose: &Pose) -> Isometry3<f64> {
        self.camera_from_robot * frame_pose.body_from_world()
    }

    /// `P * K * T * x` before dehomogenization.
    pub fn project_homogeneous(&self, frame_pose: &Pose, x: &Point3<f64>) -> (Vector3<f64>, f64) {
        let cam = self.camera_from_world(frame_pose) * x;
        (self.perspective * self.intrinsics * cam.coords, cam.z)
    }

    /// Maps ground-plane points (z = 0) to pixels for images at `frame_pose`.
    pub fn ground_homography(&self, frame_pose: &Pose) -> Homography {
        let t = self.camera_from_world(frame_pose);
        let r = t.rotation.to_rotation_matrix();
        let m = Matrix3::from_columns(&[
            r.matrix().column(0).into_owned(),
            r.matrix().column(1).into_owned(),
            t.translation.vector,
        ]);
        Homography(self.perspective * self.intrinsics * m)
    }
}

/// Projects trajectory points (world frame) into the image taken at
/// `frame_pose`. Points behind the camera or with a degenerate homogeneous
/// scale are dropped and reported.
pub fn project_trajectory(points: &[Point3<f64>], camera: &CameraModel, frame_pose: &Pose) -> ProjectedPath {
    let mut out = ProjectedPath::default();
    for (i, x) in points.iter().enumerate() {
        let (h, depth) = camera.project_homogeneous(frame_pose, x);
        if depth <= 0.0 {
            out.dropped.push((i, DropReason::BehindCamera));
        } else if h.z.abs() < 1e-12 {
            out.dropped.push((i, DropReason::Degenerate));
        } else {
            out.points.push((i, Point2::new(h.x / h.z, h.y / h.z)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optical_axis_maps_to_origin() {
        let cam = CameraModel::new(Matrix3::identity(), Matrix3::identity(), Isometry3::identity()).unwrap();
        let pose = Pose::planar(0.0, 0.0, 0.0, 0.0);
        let p = project_trajectory(&[Point3::new(0.0, 0.0, 1.0)], &cam, &pose);
        assert_eq!(p.points, vec![(0, Point2::new(0.0, 0.0))]);
    }

    #[test]
    fn pinhole_hand_computed() {
        let k = Matrix3::new(100.0, 0.0, 50.0, 0.0, 100.0, 50.0, 0.0, 0.0, 1.0);
        let cam = CameraModel::new(k, Matrix3::identity(), Isometry3::identity()).unwrap();
        let pose = Pose::planar(0.0, 0.0, 0.0, 0.0);
        let p = project_trajectory(&[Point3::new(1.0, 0.0, 2.0)], &cam, &pose);
        let px = p.points[0].1;
        assert!((px.x - 100.0).abs() < 1e-12 && (px.y - 50.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_dropped() {
        let cam = CameraModel::new(Matrix3::identity(), Matrix3::identity(), Isometry3::identity()).unwrap();
        let pose = Pose::planar(0.0, 0.0, 0.0, 0.0);
        let p = project_trajectory(&[Point3::new(0.0, 0.0, -1.0), Point3::new(1.0, 1.0, 1.0)], &cam, &pose);
        assert_eq!(p.dropped, vec![(0, DropReason::BehindCamera)]);
        assert_eq!(p.points.len(), 1);
    }

    #[test]
    fn degenerate_perspective_drops_point() {
        // P sends the homogeneous scale to zero for points with x = z.
        let p_mat = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0 + 1e-13);
        let cam = CameraModel::new(Matrix3::identity(), p_mat, Isometry3::identity()).unwrap();
        let pose = Pose::planar(0.0, 0.0, 0.0, 0.0);
        let p = project_trajectory(&[Point3::new(1.0, 0.0, 1.0)], &cam, &pose);
        assert_eq!(p.dropped, vec![(0, DropReason::Degenerate)]);
    }

    #[test]
    fn rejects_bad_intrinsics() {
        let k = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(k, Matrix3::identity(), Isometry3::identity()).is_err());
        let k = Matrix3::new(1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(k, Matrix3::identity(), Isometry3::identity()).is_err());
        assert!(CameraModel::new(Matrix3::identity(), Matrix3::zeros(), Isometry3::identity()).is_err());
    }

    #[test]
    fn quaternion_norm_is_checked() {
        assert!(Pose::from_components(0.0, [0.0; 3], [0.0, 0.0, 0.0, 1.0]).is_ok());
        assert!(Pose::from_components(0.0, [0.0; 3], [0.0, 0.0, 0.1, 1.0]).is_err());
    }

    #[test]
    fn birds_eye_maps_robot_to_center_and_scales_by_resolution() {
        let cam = CameraModel::birds_eye(96, 96, 0.05, 1.5).unwrap();
        let pose = Pose::planar(0.0, 10.0, 20.0, 0.7).north_up();
        let p = project_trajectory(
            &[Point3::new(10.0, 20.0, 0.0), Point3::new(11.0, 19.5, 0.0)],
            &cam,
            &pose,
        );
        let (a, b) = (p.points[0].1, p.points[1].1);
        assert!((a.x - 48.0).abs() < 1e-9 && (a.y - 48.0).abs() < 1e-9);
        assert!((b.x - 68.0).abs() < 1e-9 && (b.y - 58.0).abs() < 1e-9);
    }

    #[test]
    fn ground_homography_agrees_with_projection() {
        let cam = CameraModel::birds_eye(64, 48, 0.05, 1.2).unwrap();
        let pose = Pose::planar(0.0, 3.0, 4.0, 0.0);
        let h = cam.ground_homography(&pose);
        let x = Point3::new(3.4, 3.7, 0.0);
        let direct = project_trajectory(&[x], &cam, &pose).points[0].1;
        let via_h = h.apply(Point2::new(x.x, x.y)).unwrap();
        assert!((direct - via_h).norm() < 1e-9);
        let back = h.inverse().unwrap().apply(via_h).unwrap();
        assert!((back - Point2::new(x.x, x.y)).norm() < 1e-9);
    }
}
