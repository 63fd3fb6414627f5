//! One simulated teleoperation session.
//!
//! Each tick at time `t`:
//!
//! 1. commands delivered by `t` take effect on the vehicle;
//! 2. image and telemetry captures fire if their interval has elapsed;
//! 3. deliveries due by `t` update the operator-side state (record buffer,
//!    background, zoom, display);
//! 4. the operator decides and its command enters the command channel;
//! 5. the ground-truth sample is logged and the vehicle is stepped.

mod operator;
mod record;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use operator::{
    predict_arc, Command, FrameMeta, IdleOperator, Operator, OperatorView, PurePursuitOperator, PursuitConfig,
    ReplayOperator, Telemetry,
};
pub use record::{CommandLogEntry, DeliveryRow, DiagnosticRow, Event, MessageKind, SessionRecord};

use crate::channel::{ChannelPreset, ChannelQueue};
use crate::compositor::{render_plan, CompositePlan, Compositor, CompositorConfig, Mode, PastImageRecord, RobotView};
use crate::course::Course;
use crate::frame::Frame;
use crate::geometry::{CameraIntrinsics, CameraMount, CameraPose, Pose2D};
use crate::metrics::RunSample;
use crate::par::{self, Exec};
use crate::protocol::FrameDiag;
use crate::scene::{render_scene_with, SceneModel};
use crate::time::SimTime;
use crate::vehicle::{localize, step, ControlCommand, NoiseConfig, VehicleParams, VehicleState, DT};
use crate::{Error, Result};

pub const SEED_ENV: &str = "SPIR_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub mode: Mode,
    pub preset: ChannelPreset,
    pub vehicle: VehicleParams,
    pub compositor: CompositorConfig,
    pub mount: CameraMount,
    /// `None` selects the built-in course.
    pub course: Option<PathBuf>,
    pub seed: u64,
    pub realtime: bool,
    pub noise: NoiseConfig,
    pub operator: PursuitConfig,
}

impl SessionConfig {
    /// Defaults for `mode`, with the channel preset that interface uses.
    pub fn for_mode(mode: Mode) -> Self {
        SessionConfig {
            mode,
            preset: match mode {
                Mode::FrontCamera => ChannelPreset::front_camera(),
                Mode::SpirExisting | Mode::Spir2 => ChannelPreset::spir(),
            },
            vehicle: VehicleParams::default(),
            compositor: CompositorConfig::default(),
            mount: CameraMount::default(),
            course: None,
            seed: 0,
            realtime: false,
            noise: NoiseConfig::default(),
            operator: PursuitConfig::default(),
        }
    }

    /// Applies `SPIR_SEED` if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed =
                v.trim().parse().map_err(|_| Error::parse(SEED_ENV, format!("not an unsigned integer: {v:?}")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.preset.validate()?;
        CameraIntrinsics::new(self.compositor.capture_fov, self.preset.image_width, self.preset.image_height)?;
        if self.preset.data_interval != DT {
            return Err(Error::invalid(format!("telemetry interval must equal the tick ({DT})")));
        }
        Ok(())
    }

    pub fn load_course(&self) -> Result<Course> {
        match &self.course {
            Some(p) => Course::from_file(p),
            None => Ok(Course::default_course()),
        }
    }

    pub fn pursuit_operator(&self) -> Result<PurePursuitOperator> {
        Ok(PurePursuitOperator::new(self.load_course()?, self.vehicle, self.operator, self.preset.command_delay))
    }
}

#[derive(Clone, Debug)]
struct ImagePayload {
    frame: Arc<Frame>,
    pose: Pose2D,
}

/// What the console shows after a tick.
#[derive(Clone, Debug)]
pub enum Display {
    Front { frame: Arc<Frame>, meta: FrameMeta, fov: f64 },
    Composite { plan: Box<CompositePlan>, record: Arc<PastImageRecord> },
}

impl Display {
    pub fn render(&self, exec: Exec) -> Frame {
        match self {
            Display::Front { frame, .. } => (**frame).clone(),
            Display::Composite { plan, record } => render_plan(plan, record, exec),
        }
    }

    pub fn diag(&self) -> FrameDiag {
        match self {
            Display::Front { meta, fov, .. } => {
                FrameDiag { d: None, theta: *fov, record_id: Some(meta.seq), switched: false }
            }
            Display::Composite { plan, .. } => {
                FrameDiag { d: plan.depth, theta: plan.fov, record_id: Some(plan.record_id), switched: plan.switched }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    /// Ticks while `t < duration`.
    Duration(SimTime),
    /// Until the vehicle has driven `laps` times the course length along
    /// the centerline, or `limit` is reached.
    Laps { laps: u32, limit: SimTime },
}

impl Horizon {
    pub fn laps(laps: u32) -> Self {
        Horizon::Laps { laps, limit: SimTime::from_secs(1200.0 * laps as f64) }
    }
}

pub struct Session {
    config: SessionConfig,
    course: Course,
    scene: SceneModel,
    intrinsics: CameraIntrinsics,
    exec: Exec,
    state: VehicleState,
    mode: Mode,
    images: ChannelQueue<ImagePayload>,
    telemetry: ChannelQueue<Telemetry>,
    commands: ChannelQueue<ControlCommand>,
    applied: ControlCommand,
    compositor: Compositor,
    latest_image: Option<(FrameMeta, Arc<Frame>)>,
    latest_telemetry: Option<Telemetry>,
    display: Option<Display>,
    travelled: f64,
    last_s: f64,
    off_course: bool,
    degenerate: bool,
    shown_record: Option<u64>,
    record: SessionRecord,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let course = config.load_course()?;
        let scene = SceneModel::from_course(&course);
        let intrinsics = CameraIntrinsics::new(
            config.compositor.capture_fov,
            config.preset.image_width,
            config.preset.image_height,
        )?;
        let state = VehicleState::at_rest(course.start);
        let last_s = course.nearest(course.start.position()).s;
        Ok(Session {
            scene,
            intrinsics,
            exec: Exec::default(),
            state,
            mode: config.mode,
            images: ChannelQueue::new(config.preset.image_class()),
            telemetry: ChannelQueue::new(config.preset.telemetry_class()),
            commands: ChannelQueue::new(config.preset.command_class()),
            applied: ControlCommand::idle(SimTime::ZERO),
            compositor: Compositor::new(config.compositor, config.vehicle)?,
            latest_image: None,
            latest_telemetry: None,
            display: None,
            travelled: 0.0,
            last_s,
            off_course: false,
            degenerate: false,
            shown_record: None,
            record: SessionRecord::new(config.clone()),
            course,
            config,
        })
    }

    /// Strategy for the capture renders.
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn time(&self) -> SimTime {
        self.state.sim_time
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn course(&self) -> &Course {
        &self.course
    }

    pub fn display(&self) -> Option<&Display> {
        self.display.as_ref()
    }

    /// Ground truth. Operators must not read this.
    pub fn vehicle_state(&self) -> &VehicleState {
        &self.state
    }

    pub fn record(&self) -> &SessionRecord {
        &self.record
    }

    pub fn into_record(self) -> SessionRecord {
        self.record
    }

    /// Ground-truth arc length driven so far (negative when reversing).
    pub fn travelled(&self) -> f64 {
        self.travelled
    }

    pub fn set_mode(&mut self, mode: Mode) {
        if mode != self.mode {
            self.mode = mode;
            self.record.events.push(Event::ModeChange { t: self.time(), mode });
        }
    }

    pub fn note_disconnect(&mut self) {
        self.record.events.push(Event::Disconnected { t: self.time() });
    }

    pub fn tick(&mut self, operator: &mut dyn Operator) {
        let now = self.time();

        for msg in self.commands.poll(now) {
            self.applied = msg.payload;
        }

        let truth = self.state;
        let sensed = localize(&truth, &self.noise());
        let (scene, intr, exec, mount) = (&self.scene, &self.intrinsics, self.exec, self.config.mount);
        if let Some(stamp) = self.images.maybe_capture(now, || ImagePayload {
            frame: Arc::new(render_scene_with(&CameraPose::from_pose(&truth.pose, &mount), intr, scene, exec)),
            pose: sensed,
        }) {
            self.log_delivery(MessageKind::Image, stamp);
        }
        if let Some(stamp) = self.telemetry.maybe_capture(now, || Telemetry {
            pose: sensed,
            speed: truth.speed,
            steering: truth.steering,
            sample_time: now,
        }) {
            self.log_delivery(MessageKind::Telemetry, stamp);
        }

        for msg in self.telemetry.poll(now) {
            self.latest_telemetry = Some(msg.payload);
        }
        for msg in self.images.poll(now) {
            let meta = FrameMeta { seq: msg.seq, capture_pose: msg.payload.pose, capture_time: msg.send_time };
            self.compositor.store(Arc::new(PastImageRecord {
                id: msg.seq,
                frame: Arc::clone(&msg.payload.frame),
                capture_pose: msg.payload.pose,
                capture_camera: CameraPose::from_pose(&msg.payload.pose, &self.config.mount),
                capture_fov: self.intrinsics.vertical_fov,
                capture_time: msg.send_time,
            }));
            self.latest_image = Some((meta, msg.payload.frame));
        }
        self.update_display(now);

        let view = OperatorView {
            t: now,
            mode: self.mode,
            telemetry: self.latest_telemetry,
            frame: self.latest_image.as_ref().map(|(m, _)| *m),
        };
        if let Some(cmd) = operator.decide(&view) {
            let stamp = self
                .commands
                .push(now, ControlCommand { throttle: cmd.throttle, steering_target: cmd.steering, timestamp: now });
            self.record.commands.push(CommandLogEntry {
                seq: stamp.seq,
                issued: now,
                deliver: stamp.deliver_time,
                throttle: cmd.throttle,
                steering: cmd.steering,
            });
        }

        self.record
            .runlog
            .push(RunSample {
                t: now,
                x: truth.pose.x,
                y: truth.pose.y,
                heading: truth.pose.heading,
                speed: truth.speed,
                steering: truth.steering,
                mode: self.mode,
            })
            .expect("ticks advance time");

        self.state = step(&truth, &self.applied, DT.as_secs(), &self.config.vehicle);
        self.state.sim_time = now + DT;
        self.track_progress();
    }

    fn noise(&self) -> NoiseConfig {
        NoiseConfig { seed: self.config.seed, ..self.config.noise }
    }

    fn log_delivery(&mut self, kind: MessageKind, stamp: crate::channel::Stamp) {
        self.record.deliveries.push(DeliveryRow {
            kind,
            seq: stamp.seq,
            send_time: stamp.send_time,
            deliver_time: stamp.deliver_time,
        });
    }

    fn update_display(&mut self, now: SimTime) {
        self.display = match self.mode {
            Mode::FrontCamera => self.latest_image.as_ref().map(|(meta, frame)| Display::Front {
                frame: Arc::clone(frame),
                meta: *meta,
                fov: self.intrinsics.vertical_fov,
            }),
            Mode::SpirExisting | Mode::Spir2 => match (self.latest_telemetry, self.compositor.buffer.is_empty()) {
                (Some(t), false) => {
                    let view = RobotView { pose: t.pose, speed: t.speed, steering: t.steering };
                    match self.compositor.plan(self.mode, view, now) {
                        Ok(plan) => {
                            let record = Arc::clone(self.compositor.active().expect("plan selected a record"));
                            Some(Display::Composite { plan: Box::new(plan), record })
                        }
                        Err(_) => None,
                    }
                }
                _ => None,
            },
        };
        let Some(display) = &self.display else { return };
        let diag = display.diag();
        let previous = self.shown_record;
        if let Display::Composite { plan, .. } = display {
            self.shown_record = Some(plan.record_id);
        }
        let (cg, height, clamped) = match display {
            Display::Composite { plan, .. } => (Some(plan.robot.pose), plan.cg_pixel_height(), plan.zoom_clamped),
            Display::Front { .. } => (None, None, false),
        };
        if let Display::Composite { plan, .. } = display {
            if plan.switched {
                self.record.events.push(Event::BackgroundSwitch { t: now, from: previous, to: plan.record_id });
            }
            let degenerate = self.mode.zoom_enabled() && plan.depth.is_none();
            if degenerate && !self.degenerate {
                let d =
                    crate::compositor::viewpoint_depth(&plan.capture_camera, &plan.robot.pose, &self.config.vehicle);
                self.record.events.push(Event::DegenerateZoom { t: now, d });
            }
            self.degenerate = degenerate;
        }
        self.record.diagnostics.push(DiagnosticRow {
            t: now,
            mode: self.mode,
            record_id: diag.record_id,
            d: diag.d,
            theta: diag.theta,
            switched: diag.switched,
            zoom_clamped: clamped,
            cg_x: cg.map(|p| p.x),
            cg_y: cg.map(|p| p.y),
            cg_heading: cg.map(|p| p.heading),
            cg_height_px: height,
        });
    }

    fn track_progress(&mut self) {
        let now = self.time();
        let near = self.course.nearest(self.state.pose.position());
        let len = self.course.length();
        let mut ds = near.s - self.last_s;
        if ds > 0.5 * len {
            ds -= len;
        } else if ds < -0.5 * len {
            ds += len;
        }
        let laps_before = (self.travelled / len).floor();
        self.travelled += ds;
        self.last_s = near.s;
        let laps_after = (self.travelled / len).floor();
        if laps_after > laps_before && laps_after >= 1.0 {
            self.record.events.push(Event::LapCompleted { t: now, lap: laps_after as u32 });
        }
        let outside = near.distance > self.course.road_half_width;
        if outside && !self.off_course {
            self.record.events.push(Event::CourseDeparture { t: now, distance: near.distance });
        } else if !outside && self.off_course {
            self.record.events.push(Event::CourseReturn { t: now });
        }
        self.off_course = outside;
    }

    /// True once the horizon is reached.
    pub fn finished(&self, horizon: &Horizon) -> bool {
        match *horizon {
            Horizon::Duration(d) => self.time() >= d,
            Horizon::Laps { laps, limit } => {
                self.travelled >= laps as f64 * self.course.length() || self.time() >= limit
            }
        }
    }
}

/// Runs a session to `horizon` as fast as possible.
pub fn run_headless(config: SessionConfig, operator: &mut dyn Operator, horizon: Horizon) -> Result<SessionRecord> {
    let mut session = Session::new(config)?;
    while !session.finished(&horizon) {
        session.tick(operator);
    }
    if let Horizon::Laps { laps, .. } = horizon {
        if session.travelled < laps as f64 * session.course.length() {
            let t = session.time();
            session.record.events.push(Event::HorizonTimeout { t });
        }
    }
    Ok(session.into_record())
}

/// Headless run driven by the configured pure-pursuit operator.
pub fn run_pursuit(config: SessionConfig, horizon: Horizon) -> Result<SessionRecord> {
    let mut op = config.pursuit_operator()?;
    run_headless(config, &mut op, horizon)
}

/// Re-runs a record's command log under its configuration, for as many
/// ticks as the original.
pub fn replay(record: &SessionRecord) -> Result<SessionRecord> {
    let mut op = ReplayOperator::new(&record.commands);
    let ticks = record.runlog.len() as i64;
    let mut session = Session::new(record.config.clone())?;
    let horizon = Horizon::Duration(SimTime::from_micros(DT.as_micros() * ticks));
    while !session.finished(&horizon) {
        session.tick(&mut op);
    }
    let mut out = session.into_record();
    // a timeout marker is a property of the original horizon, not the log
    out.events.extend(record.events.iter().filter(|e| matches!(e, Event::HorizonTimeout { .. })).cloned());
    Ok(out)
}

/// Independent pursuit sessions, one per config.
pub fn run_batch(configs: &[SessionConfig], horizon: Horizon, exec: Exec) -> Vec<Result<SessionRecord>> {
    par::map(exec, configs, |c| {
        let mut op = c.pursuit_operator()?;
        let mut session = Session::new(c.clone())?.with_exec(Exec::Sequential);
        while !session.finished(&horizon) {
            session.tick(&mut op);
        }
        Ok(session.into_record())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_ticks_is_two_seconds() {
        let mut s = Session::new(SessionConfig::for_mode(Mode::Spir2)).unwrap();
        for _ in 0..100 {
            s.tick(&mut IdleOperator);
        }
        assert_eq!(s.time(), SimTime::from_secs(2.0));
        assert_eq!(s.record().runlog.len(), 100);
    }

    #[test]
    fn zero_duration_is_empty() {
        let r = run_headless(SessionConfig::for_mode(Mode::Spir2), &mut IdleOperator, Horizon::Duration(SimTime::ZERO))
            .unwrap();
        assert!(r.runlog.is_empty() && r.commands.is_empty() && r.diagnostics.is_empty());
    }

    #[test]
    fn idle_vehicle_stays_put() {
        let cfg = SessionConfig::for_mode(Mode::SpirExisting);
        let start = cfg.load_course().unwrap().start;
        let r = run_headless(cfg, &mut IdleOperator, Horizon::Duration(SimTime::from_secs(3.0))).unwrap();
        assert!(r.runlog.samples().iter().all(|s| s.x == start.x && s.y == start.y && s.speed == 0.0));
    }

    #[test]
    fn no_composite_before_first_image() {
        let r = run_pursuit(SessionConfig::for_mode(Mode::Spir2), Horizon::Duration(SimTime::from_secs(2.5))).unwrap();
        let first = r.diagnostics.first().unwrap();
        assert_eq!(first.t, SimTime::from_secs(1.9));
        assert_eq!(first.record_id, Some(0));
    }
}
