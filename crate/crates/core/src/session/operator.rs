//! Operators decide a command each tick from what the console would show.

use std::collections::VecDeque;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::record::CommandLogEntry;
use crate::compositor::Mode;
use crate::course::Course;
use crate::geometry::Pose2D;
use crate::time::SimTime;
use crate::vehicle::VehicleParams;

/// Delayed robot state as carried by the telemetry channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub pose: Pose2D,
    pub speed: f64,
    pub steering: f64,
    pub sample_time: SimTime,
}

/// Metadata of the newest delivered camera image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMeta {
    pub seq: u64,
    pub capture_pose: Pose2D,
    pub capture_time: SimTime,
}

/// Everything an operator may look at. Ground truth is not part of it.
#[derive(Clone, Copy, Debug)]
pub struct OperatorView {
    pub t: SimTime,
    pub mode: Mode,
    pub telemetry: Option<Telemetry>,
    pub frame: Option<FrameMeta>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub throttle: f64,
    pub steering: f64,
}

impl Command {
    pub const STOP: Command = Command { throttle: 0.0, steering: 0.0 };
}

pub trait Operator {
    /// `None` sends nothing this tick.
    fn decide(&mut self, view: &OperatorView) -> Option<Command>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PursuitConfig {
    pub lookahead: f64,
    pub target_speed: f64,
    /// Extrapolate the telemetry pose along the displayed trajectory arc in
    /// the extended interface.
    #[serde(default)]
    pub predict: bool,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        PursuitConfig { lookahead: 5.0, target_speed: 0.9, predict: false }
    }
}

/// Pure pursuit on the course centerline.
///
/// The pose it steers from depends on the interface: the capture pose of
/// the newest image for the front camera and the telemetry pose (where the
/// CG model is drawn) for both past-image interfaces. With
/// [`PursuitConfig::predict`] the extended interface instead uses the
/// telemetry pose carried forward along the displayed trajectory arc to the
/// moment the command will take effect.
#[derive(Clone, Debug)]
pub struct PurePursuitOperator {
    pub course: Course,
    pub vehicle: VehicleParams,
    pub config: PursuitConfig,
    pub command_delay: SimTime,
}

impl PurePursuitOperator {
    pub fn new(course: Course, vehicle: VehicleParams, config: PursuitConfig, command_delay: SimTime) -> Self {
        PurePursuitOperator { course, vehicle, config, command_delay }
    }

    fn believed_pose(&self, view: &OperatorView) -> Option<Pose2D> {
        match view.mode {
            Mode::FrontCamera => view.frame.map(|f| f.capture_pose),
            Mode::SpirExisting => view.telemetry.map(|t| t.pose),
            Mode::Spir2 if !self.config.predict => view.telemetry.map(|t| t.pose),
            Mode::Spir2 => view.telemetry.map(|t| {
                let horizon = (view.t - t.sample_time + self.command_delay).as_secs();
                predict_arc(&t.pose, t.speed, t.steering, horizon, self.vehicle.wheelbase)
            }),
        }
    }

    pub fn steer_from(&self, pose: &Pose2D) -> f64 {
        let near = self.course.nearest(pose.position());
        let target = self.course.point_at(near.s + self.config.lookahead);
        let local = pose.inverse_transform_point(target);
        let ld2 = local.norm_squared().max(1e-9);
        let curvature = 2.0 * local.y / ld2;
        (self.vehicle.wheelbase * curvature).atan().clamp(-self.vehicle.max_steering, self.vehicle.max_steering)
    }
}

impl Operator for PurePursuitOperator {
    fn decide(&mut self, view: &OperatorView) -> Option<Command> {
        let Some(pose) = self.believed_pose(view) else {
            return Some(Command::STOP);
        };
        Some(Command {
            throttle: (self.config.target_speed / self.vehicle.max_speed).min(1.0),
            steering: self.steer_from(&pose),
        })
    }
}

/// Pose after driving `horizon` seconds at constant speed and steering.
pub fn predict_arc(pose: &Pose2D, speed: f64, steering: f64, horizon: f64, wheelbase: f64) -> Pose2D {
    let s = speed * horizon;
    let k = steering.tan() / wheelbase;
    if (k * s).abs() < 1e-9 {
        let (sn, cs) = pose.heading.sin_cos();
        return Pose2D::new(pose.x + s * cs, pose.y + s * sn, pose.heading);
    }
    let dh = k * s;
    let local = Vector2::new(dh.sin() / k, (1.0 - dh.cos()) / k);
    let p = pose.transform_point(local);
    Pose2D::new(p.x, p.y, pose.heading + dh)
}

/// Re-issues a recorded command log at the recorded instants.
#[derive(Clone, Debug)]
pub struct ReplayOperator {
    pending: VecDeque<CommandLogEntry>,
}

impl ReplayOperator {
    pub fn new(log: &[CommandLogEntry]) -> Self {
        let mut pending: Vec<_> = log.to_vec();
        pending.sort_by_key(|c| (c.issued, c.seq));
        ReplayOperator { pending: pending.into() }
    }
}

impl Operator for ReplayOperator {
    fn decide(&mut self, view: &OperatorView) -> Option<Command> {
        while self.pending.front().is_some_and(|c| c.issued < view.t) {
            self.pending.pop_front();
        }
        match self.pending.front() {
            Some(c) if c.issued == view.t => {
                let c = self.pending.pop_front().expect("front exists");
                Some(Command { throttle: c.throttle, steering: c.steering })
            }
            _ => None,
        }
    }
}

/// Sends nothing, ever.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdleOperator;

impl Operator for IdleOperator {
    fn decide(&mut self, _view: &OperatorView) -> Option<Command> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{step, ControlCommand, VehicleState};

    #[test]
    fn arc_prediction_matches_integration() {
        let p = VehicleParams::default();
        let start = Pose2D::new(1.0, -2.0, 0.4);
        let mut s = VehicleState { speed: 0.9, steering: 0.2, ..VehicleState::at_rest(start) };
        let cmd = ControlCommand { throttle: 0.9, steering_target: 0.2, timestamp: SimTime::ZERO };
        for _ in 0..50 {
            s = step(&s, &cmd, 0.02, &p);
        }
        let pred = predict_arc(&start, 0.9, 0.2, 1.0, p.wheelbase);
        assert!(pred.distance_to(&s.pose) < 1e-6);
        let straight = predict_arc(&start, 1.0, 0.0, 2.0, p.wheelbase);
        assert!((straight.x - (1.0 + 2.0 * 0.4f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn pursuit_steers_toward_course() {
        let course = Course::default_course();
        let op =
            PurePursuitOperator::new(course.clone(), VehicleParams::default(), PursuitConfig::default(), SimTime::ZERO);
        let s = course.start;
        // left of the line (course start heads +x, left is +y) -> steer right
        assert!(op.steer_from(&Pose2D::new(s.x, s.y + 1.0, s.heading)) < 0.0);
        assert!(op.steer_from(&Pose2D::new(s.x, s.y - 1.0, s.heading)) > 0.0);
    }

    #[test]
    fn no_information_means_stop() {
        let mut op = PurePursuitOperator::new(
            Course::default_course(),
            VehicleParams::default(),
            PursuitConfig::default(),
            SimTime::ZERO,
        );
        for mode in Mode::ALL {
            let view = OperatorView { t: SimTime::ZERO, mode, telemetry: None, frame: None };
            assert_eq!(op.decide(&view), Some(Command::STOP));
        }
    }

    #[test]
    fn replay_emits_at_recorded_times() {
        let entry = |ms: i64, seq: u64| CommandLogEntry {
            seq,
            issued: SimTime::from_millis(ms),
            deliver: SimTime::from_millis(ms + 500),
            throttle: seq as f64,
            steering: 0.0,
        };
        let mut op = ReplayOperator::new(&[entry(40, 1), entry(0, 0)]);
        let at = |ms| OperatorView { t: SimTime::from_millis(ms), mode: Mode::Spir2, telemetry: None, frame: None };
        assert_eq!(op.decide(&at(0)).unwrap().throttle, 0.0);
        assert_eq!(op.decide(&at(20)), None);
        assert_eq!(op.decide(&at(40)).unwrap().throttle, 1.0);
        assert_eq!(op.decide(&at(60)), None);
    }
}
