//! View synthesis from past image records.
//!
//! Frames delivered over the image channel are stored with the pose the
//! robot reported when capturing them ([`records`]). One of them is the
//! active background ([`selection`]); the robot's CG model is drawn into it
//! at the latest delayed pose, with the field of view narrowed so the model
//! keeps a constant apparent size ([`zoom`]) and, optionally, steering
//! guide lines ([`overlay`]). [`compose`] ties these together.

pub mod compose;
pub mod overlay;
pub mod records;
pub mod selection;
pub mod zoom;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

pub use compose::{compose_frame, frontcam_frame, render_plan, viewpoint_depth, CompositePlan, Compositor, RobotView};
pub use overlay::{build_overlays, build_overlays_local, point_line_distance, OverlayConfig, OverlaySet, Wireframe};
pub use records::{PastImageRecord, RecordBuffer};
pub use selection::{robot_visible, BackgroundState, Selection};
pub use zoom::{fov_for_ratio, ZoomState};

/// The three compared operator displays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Latest delayed camera frame as-is.
    #[serde(rename = "front-camera")]
    FrontCamera,
    /// Past-image background without zoom or guide lines.
    #[serde(rename = "spir-existing")]
    SpirExisting,
    /// Past-image background with zoom and guide lines.
    #[serde(rename = "spir2")]
    Spir2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::FrontCamera, Mode::SpirExisting, Mode::Spir2];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FrontCamera => "front-camera",
            Mode::SpirExisting => "spir-existing",
            Mode::Spir2 => "spir2",
        }
    }

    pub fn uses_records(self) -> bool {
        !matches!(self, Mode::FrontCamera)
    }

    pub fn zoom_enabled(self) -> bool {
        matches!(self, Mode::Spir2)
    }

    pub fn overlays_enabled(self) -> bool {
        matches!(self, Mode::Spir2)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownName { kind: "mode", value: s.to_string() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositorConfig {
    /// Switch when the robot is farther than this from the active viewpoint.
    pub switch_threshold: f64,
    /// Minimum robot-to-viewpoint distance for a replacement background.
    pub min_distance: f64,
    /// Target ratio of robot height to vertical field extent.
    pub zoom_ratio: f64,
    /// Capture field of view (radians).
    pub capture_fov: f64,
    pub buffer_capacity: usize,
    pub overlay: OverlayConfig,
}

impl Default for CompositorConfig {
    fn default() -> Self {
        CompositorConfig {
            switch_threshold: 10.0,
            min_distance: 6.0,
            zoom_ratio: 0.25,
            capture_fov: 60f64.to_radians(),
            buffer_capacity: 16,
            overlay: OverlayConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_are_exact() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("spir".parse::<Mode>().is_err());
    }
}
