//! Field-of-view law keeping the robot's apparent size constant.
//!
//! With `d` the viewpoint-to-robot depth, `h` the robot height and `H` the
//! vertical extent of the view at depth `d`:
//!
//! ```text
//! d * tan(theta / 2) = H / 2,   k = h / H
//! theta = 2 * atan(h / (2 * d * k))
//! ```
//!
//! The law can only narrow the view, so `theta` is capped at the capture
//! field of view.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Unclamped zoom law.
pub fn fov_for_ratio(height: f64, depth: f64, ratio: f64) -> f64 {
    2.0 * (height / (2.0 * depth * ratio)).atan()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoomState {
    pub robot_height: f64,
    pub ratio: f64,
    pub capture_fov: f64,
    /// Depths at or below `min_distance / 2` are rejected.
    pub min_distance: f64,
    pub depth: f64,
    pub fov: f64,
    pub extent: f64,
    /// Last update hit the capture-FOV cap.
    pub clamped: bool,
}

impl ZoomState {
    pub fn new(robot_height: f64, ratio: f64, capture_fov: f64, min_distance: f64) -> Result<Self> {
        if !(robot_height > 0.0) {
            return Err(Error::invalid("robot height must be positive"));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid("zoom ratio must be in (0, 1)"));
        }
        Ok(ZoomState {
            robot_height,
            ratio,
            capture_fov,
            min_distance,
            depth: f64::NAN,
            fov: capture_fov,
            extent: f64::NAN,
            clamped: true,
        })
    }

    /// Updates the state for depth `d` and returns the new field of view.
    pub fn update(&mut self, d: f64) -> Result<f64> {
        if !(d > 0.5 * self.min_distance) {
            return Err(Error::DegenerateDistance(d));
        }
        let law = fov_for_ratio(self.robot_height, d, self.ratio);
        self.clamped = law > self.capture_fov;
        self.fov = law.min(self.capture_fov);
        self.depth = d;
        self.extent = 2.0 * d * (0.5 * self.fov).tan();
        Ok(self.fov)
    }

    /// Sub-window scale relative to the capture view: `tan(theta/2) /
    /// tan(theta_capture/2)`.
    pub fn window_scale(&self) -> f64 {
        (0.5 * self.fov).tan() / (0.5 * self.capture_fov).tan()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn unit_argument_gives_right_angle() {
        let (h, d) = (1.2, 3.0);
        let k = h / (2.0 * d);
        assert!((fov_for_ratio(h, d, k) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn scalar_case() {
        // 2 * atan(1.2 / (2 * 10 * 0.2)) = 2 * atan(0.3)
        let theta = fov_for_ratio(1.2, 10.0, 0.2);
        assert!((theta - 0.582_913_588_955_734_2).abs() < 1e-12);
        assert!((theta.to_degrees() - 33.398_5).abs() < 1e-3);
    }

    #[test]
    fn ratio_identity_unclamped() {
        let mut z = ZoomState::new(1.2, 0.2, 170f64.to_radians(), 2.0).unwrap();
        let theta = z.update(10.0).unwrap();
        assert!(!z.clamped);
        let k = 1.2 / (2.0 * 10.0 * (theta / 2.0).tan());
        assert!((k - 0.2).abs() < 1e-15);
        assert!((z.robot_height / z.extent - 0.2).abs() < 1e-15);
    }

    #[test]
    fn clamps_to_capture_fov() {
        let cap = 60f64.to_radians();
        let mut z = ZoomState::new(1.2, 0.15, cap, 2.0).unwrap();
        assert_eq!(z.update(2.0).unwrap(), cap);
        assert!(z.clamped);
        assert_eq!(z.window_scale(), 1.0);
        assert!(z.update(20.0).unwrap() < cap);
        assert!(z.window_scale() < 1.0);
    }

    #[test]
    fn degenerate_distance() {
        let mut z = ZoomState::new(1.2, 0.2, 1.0, 6.0).unwrap();
        assert!(matches!(z.update(3.0), Err(Error::DegenerateDistance(_))));
        assert!(z.update(-1.0).is_err());
        assert!(z.update(3.0001).is_ok());
    }

    #[test]
    fn parameter_validation() {
        assert!(ZoomState::new(0.0, 0.2, 1.0, 1.0).is_err());
        assert!(ZoomState::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ZoomState::new(1.0, 0.0, 1.0, 1.0).is_err());
    }
}
