//! Planar poses, the robot-mounted pinhole camera and projection of world
//! geometry into pixels.
//!
//! World frame: x/y on the ground, z up. Camera frame follows the usual
//! computer-vision convention: x right, y down, z along the optical axis.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// Near clipping depth in metres.
pub const EPS_NEAR: f64 = 0.1;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Radians, counterclockwise from +x, always in (−π, π].
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2D { x, y, heading: wrap_angle(heading) }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.position() - other.position()).norm()
    }

    /// Maps a point from this pose's body frame (+x forward, +y left) into
    /// the world frame.
    pub fn transform_point(&self, local: Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.heading.sin_cos();
        Vector2::new(self.x + c * local.x - s * local.y, self.y + s * local.x + c * local.y)
    }

    /// Inverse of [`Pose2D::transform_point`].
    pub fn inverse_transform_point(&self, world: Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.heading.sin_cos();
        let d = world - self.position();
        Vector2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }
}

/// Rigid camera mount relative to the rear-axle origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraMount {
    pub forward: f64,
    pub height: f64,
    /// Downward pitch in radians.
    pub pitch: f64,
}

impl Default for CameraMount {
    /// Half the default body height, tilted slightly down.
    fn default() -> Self {
        CameraMount { forward: 0.5, height: 0.6, pitch: 5f64.to_radians() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    /// Rows are the camera right, down and forward axes expressed in world
    /// coordinates, so `rotation * (p - position)` is the camera-frame point.
    pub rotation: Matrix3<f64>,
}

impl CameraPose {
    pub fn from_pose(pose: &Pose2D, mount: &CameraMount) -> Self {
        let (sy, cy) = pose.heading.sin_cos();
        let (sp, cp) = mount.pitch.sin_cos();
        let forward = Vector3::new(cp * cy, cp * sy, -sp);
        let right = Vector3::new(sy, -cy, 0.0);
        let down = forward.cross(&right);
        let position = Vector3::new(pose.x + mount.forward * cy, pose.y + mount.forward * sy, mount.height);
        CameraPose {
            position,
            rotation: Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]),
        }
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * (world - self.position)
    }

    pub fn to_world(&self, cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * cam + self.position
    }

    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// Unit heading of the optical axis projected on the ground.
    pub fn ground_heading(&self) -> Vector2<f64> {
        let f = self.forward();
        Vector2::new(f.x, f.y).normalize()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics { vertical_fov: 60f64.to_radians(), width: 640, height: 480 }
    }
}

impl CameraIntrinsics {
    pub fn new(vertical_fov: f64, width: u32, height: u32) -> crate::Result<Self> {
        if !(vertical_fov > 0.0 && vertical_fov < PI) {
            return Err(crate::Error::invalid(format!("vertical fov {vertical_fov} outside (0, pi)")));
        }
        if width == 0 || height == 0 {
            return Err(crate::Error::invalid("image dimensions must be positive"));
        }
        Ok(CameraIntrinsics { vertical_fov, width, height })
    }

    pub fn with_vertical_fov(&self, vertical_fov: f64) -> Self {
        CameraIntrinsics { vertical_fov, ..*self }
    }

    /// Focal length in pixels (square pixels).
    pub fn focal(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.vertical_fov).tan()
    }

    pub fn principal_point(&self) -> Pixel {
        Pixel { u: 0.5 * self.width as f64, v: 0.5 * self.height as f64 }
    }

    pub fn horizontal_fov(&self) -> f64 {
        2.0 * (0.5 * self.width as f64 / self.focal()).atan()
    }

    /// Projects a camera-frame point; `None` when depth is not positive.
    pub fn project_camera(&self, p: &Vector3<f64>) -> Option<Pixel> {
        if p.z <= 0.0 {
            return None;
        }
        let f = self.focal();
        let c = self.principal_point();
        Some(Pixel { u: c.u + f * p.x / p.z, v: c.v + f * p.y / p.z })
    }

    /// Camera-frame ray direction (z = 1) through a pixel.
    pub fn ray(&self, px: Pixel) -> Vector3<f64> {
        let f = self.focal();
        let c = self.principal_point();
        Vector3::new((px.u - c.u) / f, (px.v - c.v) / f, 1.0)
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < self.width as f64 && px.v < self.height as f64
    }
}

/// Continuous image coordinate; the image spans `[0, width) x [0, height)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

pub type PixelSegment = (Pixel, Pixel);

pub fn project_point(camera: &CameraPose, intr: &CameraIntrinsics, world_point: &Vector3<f64>) -> Option<Pixel> {
    intr.project_camera(&camera.to_camera(world_point))
}

/// Clips a camera-frame segment to `z >= EPS_NEAR`. Clipped endpoints get a
/// depth of exactly `EPS_NEAR`.
pub fn clip_near(a: Vector3<f64>, b: Vector3<f64>) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let a_in = a.z >= EPS_NEAR;
    let b_in = b.z >= EPS_NEAR;
    match (a_in, b_in) {
        (true, true) => Some((a, b)),
        (false, false) => None,
        _ => {
            let t = (EPS_NEAR - a.z) / (b.z - a.z);
            let mut m = a + (b - a) * t;
            m.z = EPS_NEAR;
            if a_in {
                Some((a, m))
            } else {
                Some((m, b))
            }
        }
    }
}

pub fn project_segment(
    camera: &CameraPose,
    intr: &CameraIntrinsics,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
) -> Option<PixelSegment> {
    let (ca, cb) = clip_near(camera.to_camera(a), camera.to_camera(b))?;
    Some((intr.project_camera(&ca)?, intr.project_camera(&cb)?))
}

/// Projects consecutive segments of a 3-D polyline, dropping the parts in
/// front of the near plane.
pub fn project_polyline3(camera: &CameraPose, intr: &CameraIntrinsics, points: &[Vector3<f64>]) -> Vec<PixelSegment> {
    points.windows(2).filter_map(|w| project_segment(camera, intr, &w[0], &w[1])).collect()
}

/// Ground (z = 0) polyline variant of [`project_polyline3`].
pub fn project_polyline(
    camera: &CameraPose,
    intr: &CameraIntrinsics,
    ground_polyline: &[Vector2<f64>],
) -> Vec<PixelSegment> {
    let pts: Vec<Vector3<f64>> = ground_polyline.iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect();
    project_polyline3(camera, intr, &pts)
}

/// Intersects the ray through `px` with the ground plane.
pub fn back_project_ground(camera: &CameraPose, intr: &CameraIntrinsics, px: Pixel) -> Option<Vector3<f64>> {
    let dir = camera.rotation.transpose() * intr.ray(px);
    if dir.z >= 0.0 {
        return None;
    }
    let s = -camera.position.z / dir.z;
    Some(camera.position + dir * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3x4;

    fn level_camera() -> CameraPose {
        CameraPose::from_pose(&Pose2D::new(0.0, 0.0, 0.0), &CameraMount { forward: 0.0, height: 0.0, pitch: 0.0 })
    }

    /// P = K [R | -R c] built as one homogeneous matrix.
    fn oracle_projection(cam: &CameraPose, intr: &CameraIntrinsics, p: &Vector3<f64>) -> Option<Pixel> {
        let f = 0.5 * intr.height as f64 / (0.5 * intr.vertical_fov).tan();
        let k = Matrix3::new(f, 0.0, intr.width as f64 / 2.0, 0.0, f, intr.height as f64 / 2.0, 0.0, 0.0, 1.0);
        let t = -(cam.rotation * cam.position);
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&cam.rotation);
        rt.set_column(3, &t);
        let h = k * rt * nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
        (h.z > 0.0).then(|| Pixel { u: h.x / h.z, v: h.y / h.z })
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-7.0) - (-7.0 + TAU)).abs() < 1e-12);
    }

    #[test]
    fn optical_axis_hits_center() {
        let cam = CameraPose::from_pose(&Pose2D::new(3.0, -2.0, 0.7), &CameraMount::default());
        let intr = CameraIntrinsics::default();
        for depth in [0.5, 3.0, 200.0] {
            let p = cam.position + cam.forward() * depth;
            let px = project_point(&cam, &intr, &p).unwrap();
            assert!((px.u - 320.0).abs() < 1e-9 && (px.v - 240.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vertical_fov_boundary_is_top_row() {
        let cam = level_camera();
        let intr = CameraIntrinsics::new(90f64.to_radians(), 480, 480).unwrap();
        let d = 7.0;
        let px = project_point(&cam, &intr, &Vector3::new(d, 0.0, d * 45f64.to_radians().tan())).unwrap();
        assert!(px.v.abs() < 1e-9, "v = {}", px.v);
        assert!((px.u - 240.0).abs() < 1e-9);
    }

    #[test]
    fn behind_camera() {
        let cam = level_camera();
        let intr = CameraIntrinsics::default();
        assert!(project_point(&cam, &intr, &Vector3::new(-1.0, 0.0, 0.0)).is_none());
        assert!(project_point(&cam, &intr, &Vector3::new(0.0, 1.0, 0.0)).is_none());
    }

    #[test]
    fn matches_homogeneous_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let pose =
                Pose2D::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-PI..PI));
            let mount = CameraMount {
                forward: rng.random_range(-1.0..1.0),
                height: rng.random_range(0.2..3.0),
                pitch: rng.random_range(-0.5..0.5),
            };
            let cam = CameraPose::from_pose(&pose, &mount);
            let intr = CameraIntrinsics::new(rng.random_range(0.2..2.5), 640, 480).unwrap();
            let p =
                Vector3::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-2.0..5.0));
            let a = project_point(&cam, &intr, &p);
            let b = oracle_projection(&cam, &intr, &p);
            match (a, b) {
                (Some(a), Some(b)) => {
                    let scale = 1.0 + a.u.abs().max(a.v.abs());
                    assert!((a.u - b.u).abs() < 1e-9 * scale && (a.v - b.v).abs() < 1e-9 * scale);
                }
                (None, None) => {}
                other => panic!("disagreement {other:?}"),
            }
        }
    }

    #[test]
    fn polyline_behind_is_empty() {
        let cam = level_camera();
        let intr = CameraIntrinsics::default();
        let line = vec![Vector2::new(-1.0, 0.0), Vector2::new(-10.0, 3.0), Vector2::new(-4.0, -3.0)];
        assert!(project_polyline(&cam, &intr, &line).is_empty());
    }

    #[test]
    fn clipped_endpoint_sits_on_near_plane() {
        let cam = CameraPose::from_pose(&Pose2D::new(0.0, 0.0, 0.0), &CameraMount::default());
        let a = Vector3::new(-3.0, 0.4, 0.0);
        let b = Vector3::new(6.0, -0.2, 0.0);
        let (ca, cb) = clip_near(cam.to_camera(&a), cam.to_camera(&b)).unwrap();
        assert_eq!(ca.z, EPS_NEAR);
        assert_eq!(cb, cam.to_camera(&b));
        // the clipped point still lies on the original segment
        let wa = cam.to_world(&ca);
        let t = (wa.x - a.x) / (b.x - a.x);
        let on_line = a + (b - a) * t;
        assert!((on_line - wa).norm() < 1e-9);
    }

    #[test]
    fn straight_ground_line_projects_collinear() {
        let cam = CameraPose::from_pose(&Pose2D::new(0.0, 0.0, 0.3), &CameraMount::default());
        let intr = CameraIntrinsics::default();
        let line: Vec<_> = (0..20).map(|i| Vector2::new(i as f64 * 2.0, 0.5 + i as f64 * 0.3)).collect();
        let segs = project_polyline(&cam, &intr, &line);
        assert!(!segs.is_empty());
        let (p0, p1) = (segs[0].0, segs.last().unwrap().1);
        let (dx, dy) = (p1.u - p0.u, p1.v - p0.v);
        let len = dx.hypot(dy);
        for (a, b) in &segs {
            for p in [a, b] {
                let dist = ((p.u - p0.u) * dy - (p.v - p0.v) * dx).abs() / len;
                assert!(dist < 0.5, "off-line by {dist}");
            }
        }
    }
}
