//! Kinematic bicycle model on a fixed timestep, plus simulated localization.

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose2D};
use crate::time::SimTime;

/// Fixed simulation step shared by vehicle, channels and compositor.
pub const DT: SimTime = SimTime::from_millis(20);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub track_width: f64,
    /// Height of the body, also the height used by the zoom law.
    pub body_height: f64,
    pub max_speed: f64,
    pub max_steering: f64,
    /// Reverse speed limit as a fraction of `max_speed`.
    pub reverse_fraction: f64,
    /// rad/s
    pub steering_rate: f64,
    /// m/s²
    pub acceleration: f64,
    pub front_overhang: f64,
    pub rear_overhang: f64,
    /// Extra body width beyond the track.
    pub body_margin: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase: 2.0,
            track_width: 1.2,
            body_height: 1.2,
            max_speed: 1.0,
            max_steering: 35f64.to_radians(),
            reverse_fraction: 0.5,
            steering_rate: 45f64.to_radians(),
            acceleration: 0.5,
            front_overhang: 0.5,
            rear_overhang: 0.3,
            body_margin: 0.2,
        }
    }
}

impl VehicleParams {
    pub fn body_length(&self) -> f64 {
        self.wheelbase + self.front_overhang + self.rear_overhang
    }

    pub fn body_width(&self) -> f64 {
        self.track_width + self.body_margin
    }

    /// Body footprint corners in the vehicle frame (rear axle origin),
    /// counterclockwise from rear-right.
    pub fn footprint(&self) -> [Vector2<f64>; 4] {
        let (r, f) = (-self.rear_overhang, self.wheelbase + self.front_overhang);
        let w = 0.5 * self.body_width();
        [Vector2::new(r, -w), Vector2::new(f, -w), Vector2::new(f, w), Vector2::new(r, w)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pose: Pose2D,
    pub speed: f64,
    pub steering: f64,
    pub sim_time: SimTime,
}

impl VehicleState {
    pub fn at_rest(pose: Pose2D) -> Self {
        VehicleState { pose, speed: 0.0, steering: 0.0, sim_time: SimTime::ZERO }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Normalised pedal in [−1, 1].
    pub throttle: f64,
    pub steering_target: f64,
    pub timestamp: SimTime,
}

impl ControlCommand {
    pub fn idle(timestamp: SimTime) -> Self {
        ControlCommand { throttle: 0.0, steering_target: 0.0, timestamp }
    }
}

fn slew(current: f64, target: f64, max_delta: f64) -> f64 {
    current + (target - current).clamp(-max_delta, max_delta)
}

/// Advances the vehicle by `dt` seconds.
///
/// Speed and steering first slew toward the command targets, then the pose
/// is integrated with the midpoint rule holding both constant over the step.
pub fn step(state: &VehicleState, cmd: &ControlCommand, dt: f64, params: &VehicleParams) -> VehicleState {
    assert!(dt > 0.0, "dt must be positive");
    let throttle = cmd.throttle.clamp(-1.0, 1.0);
    let target_speed = if throttle >= 0.0 {
        throttle * params.max_speed
    } else {
        throttle * params.max_speed * params.reverse_fraction
    };
    let target_steer = cmd.steering_target.clamp(-params.max_steering, params.max_steering);
    let speed = slew(state.speed, target_speed, params.acceleration * dt)
        .clamp(-params.max_speed * params.reverse_fraction, params.max_speed);
    let steering =
        slew(state.steering, target_steer, params.steering_rate * dt).clamp(-params.max_steering, params.max_steering);

    let yaw_rate = speed * steering.tan() / params.wheelbase;
    let mid_heading = state.pose.heading + 0.5 * yaw_rate * dt;
    let pose = Pose2D::new(
        state.pose.x + speed * mid_heading.cos() * dt,
        state.pose.y + speed * mid_heading.sin() * dt,
        state.pose.heading + yaw_rate * dt,
    );
    VehicleState { pose, speed, steering, sim_time: state.sim_time + SimTime::from_secs(dt) }
}

/// Zero-mean Gaussian localization error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub sigma_position: f64,
    pub sigma_heading: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { enabled: false, sigma_position: 0.1, sigma_heading: 0.01, seed: 0 }
    }
}

/// Pose estimate for `state`. With noise enabled the perturbation is a pure
/// function of the seed and the state's timestamp.
pub fn localize(state: &VehicleState, noise: &NoiseConfig) -> Pose2D {
    if !noise.enabled {
        return state.pose;
    }
    let stream = (state.sim_time.as_micros() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ stream);
    let pos = Normal::new(0.0, noise.sigma_position).expect("finite sigma");
    let head = Normal::new(0.0, noise.sigma_heading).expect("finite sigma");
    Pose2D::new(
        state.pose.x + pos.sample(&mut rng),
        state.pose.y + pos.sample(&mut rng),
        wrap_angle(state.pose.heading + head.sample(&mut rng)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cruising(speed: f64, steering: f64) -> VehicleState {
        VehicleState { speed, steering, ..VehicleState::at_rest(Pose2D::new(1.0, 2.0, 0.3)) }
    }

    #[test]
    fn straight_line() {
        let p = VehicleParams::default();
        let mut s = cruising(1.0, 0.0);
        let cmd = ControlCommand { throttle: 1.0, steering_target: 0.0, timestamp: SimTime::ZERO };
        for _ in 0..100 {
            s = step(&s, &cmd, 0.02, &p);
        }
        let d = s.pose.position() - Vector2::new(1.0, 2.0);
        assert!((d.norm() - 2.0).abs() < 1e-12);
        assert!((d.y.atan2(d.x) - 0.3).abs() < 1e-12);
        assert!((s.pose.heading - 0.3).abs() < 1e-15);
        assert_eq!(s.sim_time, SimTime::from_secs(2.0));
    }

    #[test]
    fn full_circle_returns_to_start() {
        let p = VehicleParams::default();
        let delta = 30f64.to_radians();
        let radius = p.wheelbase / delta.tan();
        let arc = 2.0 * PI * radius;
        let start = cruising(1.0, delta);
        let cmd = ControlCommand { throttle: 1.0, steering_target: delta, timestamp: SimTime::ZERO };
        let dt = 0.02;
        let full = (arc / dt).floor() as usize;
        let mut s = start;
        for _ in 0..full {
            s = step(&s, &cmd, dt, &p);
        }
        let rem = arc - full as f64 * dt;
        if rem > 1e-12 {
            s = step(&s, &cmd, rem, &p);
        }
        let err = (s.pose.position() - start.pose.position()).norm();
        assert!(err < 1e-3, "closure error {err}");
        assert!(wrap_angle(s.pose.heading - start.pose.heading).abs() < 1e-9);
    }

    #[test]
    fn reverse_clamped() {
        let p = VehicleParams::default();
        let mut s = VehicleState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let cmd = ControlCommand { throttle: -1.0, steering_target: 0.0, timestamp: SimTime::ZERO };
        let floor = -p.max_speed * p.reverse_fraction;
        for _ in 0..1000 {
            s = step(&s, &cmd, 0.02, &p);
            assert!(s.speed >= floor);
        }
        assert!((s.speed - floor).abs() < 1e-12);
    }

    #[test]
    fn localize_without_noise_is_truth() {
        let s = cruising(0.5, 0.1);
        assert_eq!(localize(&s, &NoiseConfig::default()), s.pose);
    }

    #[test]
    fn localize_noise_is_reproducible() {
        let s = cruising(0.5, 0.1);
        let n = NoiseConfig { enabled: true, seed: 42, ..NoiseConfig::default() };
        assert_eq!(localize(&s, &n), localize(&s, &n));
        assert_ne!(localize(&s, &n), s.pose);
    }

    #[test]
    fn localize_noise_is_unbiased() {
        let n = NoiseConfig { enabled: true, sigma_position: 0.1, seed: 9, ..NoiseConfig::default() };
        let base = cruising(0.0, 0.0);
        let count = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in 0..count {
            let s = VehicleState { sim_time: SimTime::from_millis(20 * i), ..base };
            let p = localize(&s, &n);
            sx += p.x - base.pose.x;
            sy += p.y - base.pose.y;
        }
        let bound = 3.0 * 0.1 / (count as f64).sqrt();
        assert!((sx / count as f64).abs() < bound);
        assert!((sy / count as f64).abs() < bound);
    }
}
