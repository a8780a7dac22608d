//! Pinhole camera model and rigid poses.
//!
//! Conventions: poses map camera-frame points into the world
//! (`p_world = R * p_cam + t`). The camera looks along +Z, image x points
//! right and image y points down. Pixel centers sit at integer coordinates.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Camera-frame depths at or below this are treated as behind the camera.
pub const MIN_PROJECT_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self { fx, fy, cx, cy, width, height };
        intr.validate()?;
        Ok(intr)
    }

    /// Intrinsics with the principal point at the image center and the given
    /// horizontal field of view in degrees.
    pub fn from_fov(width: u32, height: u32, hfov_deg: f64) -> Result<Self> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(Error::invalid(format!("field of view {hfov_deg} not in (0, 180)")));
        }
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::invalid(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be at least 1x1"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Rounds a continuous pixel position to the nearest pixel (half-up) and
    /// returns its (column, row) if inside the image.
    pub fn round_pixel(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let col = (u + 0.5).floor();
        let row = (v + 0.5).floor();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some((col as usize, row as usize))
    }
}

/// A projected point: continuous pixel coordinates plus camera-frame depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

/// Projects a camera-frame point. Returns `None` when the point is behind
/// the camera or lands outside `[0, width) x [0, height)`.
pub fn project(point_cam: &Vector3<f64>, intr: &CameraIntrinsics) -> Option<Projection> {
    let z = point_cam.z;
    if !(z > MIN_PROJECT_DEPTH) {
        return None;
    }
    let u = intr.fx * point_cam.x / z + intr.cx;
    let v = intr.fy * point_cam.y / z + intr.cy;
    if !(u >= 0.0 && u < intr.width as f64 && v >= 0.0 && v < intr.height as f64) {
        return None;
    }
    Some(Projection { u, v, z })
}

/// Lifts pixel `(u, v)` at depth `z` into the camera frame.
pub fn backproject(u: f64, v: f64, z: f64, intr: &CameraIntrinsics) -> Result<Vector3<f64>> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::invalid(format!("backprojection depth must be positive, got {z}")));
    }
    Ok(Vector3::new((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    CamToWorld,
    WorldToCam,
}

/// Rigid world-from-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Rigid transforms between point sets share the pose representation.
pub type RigidTransform = CameraPose;

impl Default for CameraPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraPose {
    pub const ORTHONORMAL_TOL: f64 = 1e-6;

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose after checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = Self { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle_rad: f64, translation: Vector3<f64>) -> Self {
        let rotation = if axis.norm() > 0.0 {
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle_rad).into_inner()
        } else {
            Matrix3::identity()
        };
        Self { rotation, translation }
    }

    /// Camera at `eye` looking at `target`. `up` is the world up direction;
    /// image y points opposite to it.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::invalid("look_at target coincides with eye"));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::invalid("look_at up vector is parallel to the view direction"));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Ok(Self {
            rotation,
            translation: eye,
        })
    }

    /// Camera at `eye` with the given yaw (about world +Y, 0 = looking
    /// along +Z) and pitch (positive looks up), both in degrees. World up is +Y.
    pub fn from_yaw_pitch(eye: Vector3<f64>, yaw_deg: f64, pitch_deg: f64) -> Self {
        let (yaw, pitch) = (yaw_deg.to_radians(), pitch_deg.to_radians());
        let forward = Vector3::new(yaw.sin() * pitch.cos(), pitch.sin(), yaw.cos() * pitch.cos());
        let right = Vector3::new(-yaw.cos(), 0.0, yaw.sin());
        let down = forward.cross(&right);
        Self {
            rotation: Matrix3::from_columns(&[right, down, forward]),
            translation: eye,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rotation.iter().chain(self.translation.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("pose contains non-finite values"));
        }
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        if err > Self::ORTHONORMAL_TOL {
            return Err(Error::invalid(format!("rotation is not orthonormal (|RtR - I| = {err:.3e})")));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > Self::ORTHONORMAL_TOL {
            return Err(Error::invalid(format!("rotation determinant {det} is not +1")));
        }
        Ok(())
    }

    pub fn cam_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn world_to_cam(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.tr_mul(&(p - self.translation))
    }

    pub fn transform(&self, p: &Vector3<f64>, direction: Direction) -> Vector3<f64> {
        match direction {
            Direction::CamToWorld => self.cam_to_world(p),
            Direction::WorldToCam => self.world_to_cam(p),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &CameraPose) -> CameraPose {
        CameraPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> CameraPose {
        let rt = self.rotation.transpose();
        CameraPose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    /// Geodesic angle in radians between the two rotations.
    pub fn rotation_angle_to(&self, other: &CameraPose) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn from_row_major(rotation: [f64; 9], translation: [f64; 3]) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(&rotation), Vector3::from(translation))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intr100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1).is_ok());
    }

    #[test]
    fn project_examples() {
        let intr = intr100();
        assert_eq!(project(&Vector3::new(0.5, 0.0, 1.0), &intr), None);
        let p = project(&Vector3::new(0.25, -0.25, 1.0), &intr).unwrap();
        assert_eq!((p.u, p.v, p.z), (75.0, 25.0, 1.0));
        assert_eq!(project(&Vector3::new(0.0, 0.0, -1.0), &intr), None);
        assert_eq!(project(&Vector3::new(0.0, 0.0, 1e-7), &intr), None);
    }

    #[test]
    fn backproject_examples() {
        let intr = intr100();
        assert_eq!(backproject(75.0, 25.0, 1.0, &intr).unwrap(), Vector3::new(0.25, -0.25, 1.0));
        assert_eq!(backproject(50.0, 50.0, 2.0, &intr).unwrap(), Vector3::new(0.0, 0.0, 2.0));
        assert!(backproject(1.0, 1.0, 0.0, &intr).is_err());
        assert!(backproject(1.0, 1.0, -2.0, &intr).is_err());
    }

    #[test]
    fn backproject_project_round_trip() {
        let intr = CameraIntrinsics::new(123.4, 98.7, 80.3, 59.1, 160, 120).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut max_err: f64 = 0.0;
        for _ in 0..1000 {
            let u = rng.random_range(0.0..160.0);
            let v = rng.random_range(0.0..120.0);
            let z = rng.random_range(0.05..50.0);
            let p = backproject(u, v, z, &intr).unwrap();
            let q = project(&p, &intr).unwrap();
            max_err = max_err
                .max((q.u - u).abs() / u.abs().max(1.0))
                .max((q.v - v).abs() / v.abs().max(1.0))
                .max((q.z - z).abs() / z);
        }
        assert!(max_err < 1e-9, "max relative error {max_err}");
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> CameraPose {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(-3.1..3.1);
        let t = Vector3::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        );
        CameraPose::from_axis_angle(axis, angle, t)
    }

    #[test]
    fn transform_examples() {
        let id = CameraPose::identity();
        let p = Vector3::new(0.3, -1.2, 4.0);
        assert_eq!(id.transform(&p, Direction::CamToWorld), p);
        assert_eq!(id.transform(&p, Direction::WorldToCam), p);
        let t = CameraPose::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t.transform(&Vector3::zeros(), Direction::CamToWorld), Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn transform_round_trip_random_poses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut max_err: f64 = 0.0;
        for _ in 0..1000 {
            let pose = random_pose(&mut rng);
            pose.validate().unwrap();
            let p = Vector3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
            );
            let back = pose.world_to_cam(&pose.cam_to_world(&p));
            max_err = max_err.max((back - p).norm());
            let back = pose.cam_to_world(&pose.world_to_cam(&p));
            max_err = max_err.max((back - p).norm());
        }
        assert!(max_err < 1e-9, "max error {max_err}");
    }

    #[test]
    fn pose_validation_rejects_non_rotations() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = -1.0;
        assert!(CameraPose::new(m, Vector3::zeros()).is_err());
        m[(0, 0)] = 1.01;
        assert!(CameraPose::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let eye = Vector3::new(1.0, 2.0, -3.0);
        let target = Vector3::new(0.0, 1.0, 2.0);
        let pose = CameraPose::look_at(eye, target, Vector3::y()).unwrap();
        pose.validate().unwrap();
        let c = pose.world_to_cam(&target);
        assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12 && c.z > 0.0);
        // world up appears toward the top of the image (negative image y)
        let above = pose.world_to_cam(&(target + Vector3::y()));
        assert!(above.y < 0.0);
    }

    #[test]
    fn yaw_pitch_matches_look_at() {
        let eye = Vector3::new(0.5, 1.0, 0.0);
        let a = CameraPose::from_yaw_pitch(eye, 30.0, -10.0);
        a.validate().unwrap();
        let b = CameraPose::look_at(eye, eye + a.forward(), Vector3::y()).unwrap();
        assert!((a.rotation - b.rotation).abs().max() < 1e-12);
    }

    proptest! {
        #[test]
        fn transforms_preserve_distances(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, angle in -3.0f64..3.0,
            t in proptest::array::uniform3(-5.0f64..5.0),
            p in proptest::array::uniform3(-5.0f64..5.0),
            q in proptest::array::uniform3(-5.0f64..5.0),
        ) {
            let pose = CameraPose::from_axis_angle(Vector3::new(ax, ay, az), angle, Vector3::from(t));
            let (p, q) = (Vector3::from(p), Vector3::from(q));
            let d0 = (p - q).norm();
            let d1 = (pose.cam_to_world(&p) - pose.cam_to_world(&q)).norm();
            prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0));
        }

        #[test]
        fn compose_with_inverse_is_identity(
            angle in -3.0f64..3.0, t in proptest::array::uniform3(-5.0f64..5.0),
        ) {
            let pose = CameraPose::from_axis_angle(Vector3::new(0.2, -0.4, 1.0), angle, Vector3::from(t));
            let id = pose.compose(&pose.inverse());
            prop_assert!((id.rotation - Matrix3::identity()).abs().max() < 1e-12);
            prop_assert!(id.translation.norm() < 1e-12);
        }
    }
}
