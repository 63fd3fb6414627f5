//! Steering guide lines and the CG model wireframe.
//!
//! Geometry is built in the vehicle frame (rear-axle origin, +x forward,
//! +y left) and then placed at the delayed pose. For steering `δ` the
//! instantaneous centre of rotation sits at `(0, wheelbase / tan δ)`:
//!
//! - the axle line runs through the front axle point `(wheelbase, 0)` along
//!   `(-sin δ, cos δ)` and is extended past the ICR;
//! - the two trajectory arcs are centred on the ICR and start at the rear
//!   wheels `(0, ±track/2)`.
//!
//! Below `straight_threshold` both degrade to straight segments.

use nalgebra::{Rotation2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Pose2D;
use crate::vehicle::VehicleParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayConfig {
    /// Arc length of each predicted wheel trajectory (m).
    pub horizon: f64,
    /// Steering magnitude below which the lines are drawn straight (rad).
    pub straight_threshold: f64,
    /// Extension of the axle line beyond the wheel and beyond the ICR (m).
    pub axle_margin: f64,
    /// Polyline sampling step along the trajectories (m).
    pub arc_step: f64,
}

impl Default for OverlayConfig {
    fn default() -> Self {
        OverlayConfig { horizon: 8.0, straight_threshold: 0.02f64.to_radians(), axle_margin: 1.0, arc_step: 0.25 }
    }
}

/// Box model of the vehicle body.
#[derive(Clone, Debug, PartialEq)]
pub struct Wireframe {
    pub corners: [Vector3<f64>; 8],
}

impl Wireframe {
    /// Corner pairs forming the 12 box edges. Corners 0..4 are the footprint,
    /// 4..8 the roof in the same order.
    pub const EDGES: [(usize, usize); 12] =
        [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (1, 5), (2, 6), (3, 7)];

    pub fn at_pose(params: &VehicleParams, pose: &Pose2D) -> Self {
        let fp = params.footprint().map(|p| pose.transform_point(p));
        let h = params.body_height;
        Wireframe {
            corners: [
                Vector3::new(fp[0].x, fp[0].y, 0.0),
                Vector3::new(fp[1].x, fp[1].y, 0.0),
                Vector3::new(fp[2].x, fp[2].y, 0.0),
                Vector3::new(fp[3].x, fp[3].y, 0.0),
                Vector3::new(fp[0].x, fp[0].y, h),
                Vector3::new(fp[1].x, fp[1].y, h),
                Vector3::new(fp[2].x, fp[2].y, h),
                Vector3::new(fp[3].x, fp[3].y, h),
            ],
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vector3<f64>, Vector3<f64>)> + '_ {
        Self::EDGES.iter().map(|&(a, b)| (self.corners[a], self.corners[b]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlaySet {
    /// Front-axle extension, endpoints on the ground.
    pub axle_line: [Vector2<f64>; 2],
    pub left_track: Vec<Vector2<f64>>,
    pub right_track: Vec<Vector2<f64>>,
    /// Instantaneous centre of rotation; `None` in the straight regime.
    pub icr: Option<Vector2<f64>>,
    pub cg_model: Wireframe,
}

impl OverlaySet {
    fn map(self, pose: &Pose2D, params: &VehicleParams) -> OverlaySet {
        let t = |p: Vector2<f64>| pose.transform_point(p);
        OverlaySet {
            axle_line: self.axle_line.map(t),
            left_track: self.left_track.into_iter().map(t).collect(),
            right_track: self.right_track.into_iter().map(t).collect(),
            icr: self.icr.map(t),
            cg_model: Wireframe::at_pose(params, pose),
        }
    }

    /// Ground polylines to draw with their role.
    pub fn ground_lines(&self) -> [&[Vector2<f64>]; 3] {
        [&self.axle_line, &self.left_track, &self.right_track]
    }
}

/// Guide lines in the vehicle frame. `direction` is the sign of motion
/// (negative for reversing); zero counts as forward.
pub fn build_overlays_local(steering: f64, direction: f64, params: &VehicleParams, cfg: &OverlayConfig) -> OverlaySet {
    let wb = params.wheelbase;
    let half_track = 0.5 * params.track_width;
    let sign = if direction < 0.0 { -1.0 } else { 1.0 };
    let front = Vector2::new(wb, 0.0);
    let wheels = [Vector2::new(0.0, half_track), Vector2::new(0.0, -half_track)];
    let samples = ((cfg.horizon / cfg.arc_step).ceil() as usize).max(1);
    let origin_pose = Pose2D::new(0.0, 0.0, 0.0);

    if steering.abs() < cfg.straight_threshold {
        let reach = half_track + cfg.axle_margin;
        let tracks = wheels.map(|w| {
            (0..=samples)
                .map(|i| w + Vector2::new(sign * cfg.horizon * i as f64 / samples as f64, 0.0))
                .collect::<Vec<_>>()
        });
        let [left_track, right_track] = tracks;
        return OverlaySet {
            axle_line: [front + Vector2::new(0.0, -reach), front + Vector2::new(0.0, reach)],
            left_track,
            right_track,
            icr: None,
            cg_model: Wireframe::at_pose(params, &origin_pose),
        };
    }

    let radius = wb / steering.tan();
    let icr = Vector2::new(0.0, radius);
    let dir = Vector2::new(-steering.sin(), steering.cos());
    // signed distance from the front axle point to the ICR along `dir`
    let to_icr = wb / steering.sin();
    let (lo, hi) = if to_icr > 0.0 {
        (-cfg.axle_margin, to_icr + cfg.axle_margin)
    } else {
        (to_icr - cfg.axle_margin, cfg.axle_margin)
    };
    let turn = radius.signum() * sign;
    let tracks = wheels.map(|w| {
        let r = (w - icr).norm();
        let sweep = turn * cfg.horizon / r;
        (0..=samples).map(|i| icr + Rotation2::new(sweep * i as f64 / samples as f64) * (w - icr)).collect::<Vec<_>>()
    });
    let [left_track, right_track] = tracks;
    OverlaySet {
        axle_line: [front + dir * lo, front + dir * hi],
        left_track,
        right_track,
        icr: Some(icr),
        cg_model: Wireframe::at_pose(params, &origin_pose),
    }
}

/// Guide lines and CG model placed at `pose` (the delayed telemetry pose).
pub fn build_overlays(
    steering: f64,
    direction: f64,
    params: &VehicleParams,
    pose: &Pose2D,
    cfg: &OverlayConfig,
) -> OverlaySet {
    let steering = steering.clamp(-params.max_steering, params.max_steering);
    build_overlays_local(steering, direction, params, cfg).map(pose, params)
}

/// Distance from `p` to the infinite line through `a` and `b`.
pub fn point_line_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let d = (b - a).normalize();
    (p - a).perp(&d).abs()
}
