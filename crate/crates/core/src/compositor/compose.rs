use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::overlay::{build_overlays, OverlayConfig, OverlaySet, Wireframe};
use super::records::{PastImageRecord, RecordBuffer};
use super::selection::{BackgroundState, Selection};
use super::zoom::ZoomState;
use super::{CompositorConfig, Mode};
use crate::frame::{Frame, Rgb};
use crate::geometry::{project_segment, CameraIntrinsics, CameraPose, Pose2D};
use crate::par::Exec;
use crate::time::SimTime;
use crate::vehicle::VehicleParams;
use crate::{Error, Result};

/// What the operator side knows about the robot: the delayed telemetry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub pose: Pose2D,
    pub speed: f64,
    pub steering: f64,
}

/// Horizontal depth, along the capture camera's viewing direction, of the
/// nearest corner of the robot footprint. This is the `d` of the zoom law:
/// the vertical extent of the view is measured in the plane at that depth.
pub fn viewpoint_depth(capture_camera: &CameraPose, robot: &Pose2D, params: &VehicleParams) -> f64 {
    let axis = capture_camera.ground_heading();
    let origin = capture_camera.position.xy();
    params.footprint().iter().map(|c| (robot.transform_point(*c) - origin).dot(&axis)).fold(f64::INFINITY, f64::min)
}

/// Everything needed to rasterize one composite frame.
#[derive(Clone, Debug)]
pub struct CompositePlan {
    pub time: SimTime,
    pub mode: Mode,
    pub record_id: u64,
    pub capture_camera: CameraPose,
    pub capture_intrinsics: CameraIntrinsics,
    /// Field of view actually displayed.
    pub fov: f64,
    /// Zoom-law depth, `None` when the zoom was not applied.
    pub depth: Option<f64>,
    pub zoom_clamped: bool,
    pub switched: bool,
    pub robot: RobotView,
    pub cg_model: Wireframe,
    pub overlays: Option<OverlaySet>,
}

impl CompositePlan {
    pub fn display_intrinsics(&self) -> CameraIntrinsics {
        self.capture_intrinsics.with_vertical_fov(self.fov)
    }

    /// Analytic pixel height of the CG model's bounding box, if every corner
    /// is in front of the camera.
    pub fn cg_pixel_height(&self) -> Option<f64> {
        let intr = self.display_intrinsics();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.cg_model.corners {
            let px = intr.project_camera(&self.capture_camera.to_camera(c))?;
            lo = lo.min(px.v);
            hi = hi.max(px.v);
        }
        Some(hi - lo)
    }
}

/// Draws a plan over its background record.
pub fn render_plan(plan: &CompositePlan, record: &PastImageRecord, exec: Exec) -> Frame {
    debug_assert_eq!(plan.record_id, record.id);
    let scale = (0.5 * plan.fov).tan() / (0.5 * plan.capture_intrinsics.vertical_fov).tan();
    let mut frame = record.frame.zoom_center(scale, exec);
    let intr = plan.display_intrinsics();
    let cam = &plan.capture_camera;
    for (a, b) in plan.cg_model.edges() {
        if let Some((pa, pb)) = project_segment(cam, &intr, &a, &b) {
            frame.draw_line(pa, pb, Rgb::CG_MODEL);
        }
    }
    if let Some(o) = &plan.overlays {
        for (i, line) in o.ground_lines().into_iter().enumerate() {
            let color = if i == 0 { Rgb::AXLE_LINE } else { Rgb::TRAJECTORY };
            for w in line.windows(2) {
                let a = w[0].push(0.0);
                let b = w[1].push(0.0);
                if let Some((pa, pb)) = project_segment(cam, &intr, &a, &b) {
                    frame.draw_line(pa, pb, color);
                }
            }
        }
    }
    frame
}

/// Per-session compositor state: record store, active background and zoom.
#[derive(Clone, Debug)]
pub struct Compositor {
    pub config: CompositorConfig,
    pub vehicle: VehicleParams,
    pub buffer: RecordBuffer,
    pub background: BackgroundState,
    pub zoom: ZoomState,
}

impl Compositor {
    pub fn new(config: CompositorConfig, vehicle: VehicleParams) -> Result<Self> {
        Ok(Compositor {
            buffer: RecordBuffer::new(config.buffer_capacity)?,
            background: BackgroundState::new(config.switch_threshold, config.min_distance)?,
            zoom: ZoomState::new(vehicle.body_height, config.zoom_ratio, config.capture_fov, config.min_distance)?,
            config,
            vehicle,
        })
    }

    pub fn store(&mut self, record: Arc<PastImageRecord>) {
        let protect = self.background.active_id();
        self.buffer.store(record, protect);
    }

    pub fn active(&self) -> Option<&Arc<PastImageRecord>> {
        self.background.active.as_ref()
    }

    /// Runs background selection and the zoom law for the current delayed
    /// robot view. A degenerate zoom distance falls back to the capture FOV.
    pub fn plan(&mut self, mode: Mode, robot: RobotView, now: SimTime) -> Result<CompositePlan> {
        let selection = self.background.select(&self.buffer, &robot.pose, now)?;
        let record = self.background.active.as_ref().ok_or(Error::NoRecords)?;
        let capture_intrinsics = record.intrinsics();
        let (fov, depth, clamped) = if mode.zoom_enabled() {
            let d = viewpoint_depth(&record.capture_camera, &robot.pose, &self.vehicle);
            match self.zoom.update(d) {
                Ok(fov) => (fov, Some(d), self.zoom.clamped),
                Err(_) => (record.capture_fov, None, true),
            }
        } else {
            (record.capture_fov, None, false)
        };
        let direction = if robot.speed < 0.0 { -1.0 } else { 1.0 };
        let overlays = mode
            .overlays_enabled()
            .then(|| build_overlays(robot.steering, direction, &self.vehicle, &robot.pose, &self.config.overlay));
        Ok(CompositePlan {
            time: now,
            mode,
            record_id: record.id,
            capture_camera: record.capture_camera,
            capture_intrinsics,
            fov,
            depth,
            zoom_clamped: clamped,
            switched: matches!(selection, Selection::Switched { .. }),
            robot,
            cg_model: Wireframe::at_pose(&self.vehicle, &robot.pose),
            overlays,
        })
    }
}

/// One-shot composition: select, zoom (if `zoom` is given), draw the CG
/// model at the delayed pose and the guide lines when `overlays` is given.
pub fn compose_frame(
    background: &mut BackgroundState,
    buffer: &RecordBuffer,
    zoom: Option<&mut ZoomState>,
    robot: RobotView,
    overlays: Option<&OverlayConfig>,
    vehicle: &VehicleParams,
    now: SimTime,
) -> Result<(Frame, CompositePlan)> {
    let selection = background.select(buffer, &robot.pose, now)?;
    let record = background.active.clone().ok_or(Error::NoRecords)?;
    let (fov, depth, clamped) = match zoom {
        Some(z) => {
            let d = viewpoint_depth(&record.capture_camera, &robot.pose, vehicle);
            match z.update(d) {
                Ok(fov) => (fov, Some(d), z.clamped),
                Err(_) => (record.capture_fov, None, true),
            }
        }
        None => (record.capture_fov, None, false),
    };
    let direction = if robot.speed < 0.0 { -1.0 } else { 1.0 };
    let plan = CompositePlan {
        time: now,
        mode: if overlays.is_some() || depth.is_some() { Mode::Spir2 } else { Mode::SpirExisting },
        record_id: record.id,
        capture_camera: record.capture_camera,
        capture_intrinsics: record.intrinsics(),
        fov,
        depth,
        zoom_clamped: clamped,
        switched: matches!(selection, Selection::Switched { .. }),
        robot,
        cg_model: Wireframe::at_pose(vehicle, &robot.pose),
        overlays: overlays.map(|cfg| build_overlays(robot.steering, direction, vehicle, &robot.pose, cfg)),
    };
    Ok((render_plan(&plan, &record, Exec::default()), plan))
}

/// Front-camera display: the latest delivered frame, unmodified.
pub fn frontcam_frame(latest: Option<&Arc<Frame>>) -> Result<Arc<Frame>> {
    latest.cloned().ok_or(Error::NoFrames)
}
