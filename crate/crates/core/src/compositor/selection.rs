use std::sync::Arc;

use nalgebra::Vector3;

use super::records::{PastImageRecord, RecordBuffer};
use crate::geometry::{project_point, Pose2D};
use crate::time::SimTime;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct BackgroundState {
    pub active: Option<Arc<PastImageRecord>>,
    pub switch_threshold: f64,
    pub min_distance: f64,
    /// Instant of the last background change.
    pub last_switch_time: Option<SimTime>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Kept,
    Switched { from: Option<u64>, to: u64 },
}

/// True when the robot's ground position lands inside the record's image.
pub fn robot_visible(record: &PastImageRecord, robot: &Pose2D) -> bool {
    let intr = record.intrinsics();
    project_point(&record.capture_camera, &intr, &Vector3::new(robot.x, robot.y, 0.0))
        .is_some_and(|px| intr.contains(px))
}

impl BackgroundState {
    pub fn new(switch_threshold: f64, min_distance: f64) -> Result<Self> {
        if !(min_distance > 0.0 && min_distance < switch_threshold) {
            return Err(Error::invalid("need 0 < min_distance < switch_threshold"));
        }
        Ok(BackgroundState { active: None, switch_threshold, min_distance, last_switch_time: None })
    }

    pub fn active_id(&self) -> Option<u64> {
        self.active.as_ref().map(|r| r.id)
    }

    /// Keeps the active background while the robot is within the switch
    /// threshold of its viewpoint (boundary included). Otherwise picks the
    /// newest record that is at least `min_distance` away and sees the
    /// robot, falling back to the newest record.
    pub fn select(&mut self, buffer: &RecordBuffer, robot: &Pose2D, now: SimTime) -> Result<Selection> {
        let latest = buffer.latest().ok_or(Error::NoRecords)?;
        if let Some(active) = &self.active {
            if robot.distance_to(&active.capture_pose) <= self.switch_threshold {
                return Ok(Selection::Kept);
            }
        }
        let chosen = buffer
            .iter()
            .rev()
            .find(|r| robot.distance_to(&r.capture_pose) >= self.min_distance && robot_visible(r, robot))
            .unwrap_or(latest);
        let from = self.active_id();
        if from == Some(chosen.id) {
            return Ok(Selection::Kept);
        }
        self.active = Some(Arc::clone(chosen));
        self.last_switch_time = Some(now);
        Ok(Selection::Switched { from, to: chosen.id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Frame, Rgb};
    use crate::geometry::{CameraMount, CameraPose};

    fn rec(id: u64, x: f64) -> Arc<PastImageRecord> {
        let pose = Pose2D::new(x, 0.0, 0.0);
        Arc::new(PastImageRecord {
            id,
            frame: Arc::new(Frame::new(640, 480, Rgb::SKY)),
            capture_pose: pose,
            capture_camera: CameraPose::from_pose(&pose, &CameraMount::default()),
            capture_fov: 60f64.to_radians(),
            capture_time: SimTime::from_millis(id as i64 * 1400),
        })
    }

    #[test]
    fn empty_buffer_errors() {
        let mut bg = BackgroundState::new(10.0, 6.0).unwrap();
        let buf = RecordBuffer::new(4).unwrap();
        assert!(matches!(bg.select(&buf, &Pose2D::new(0.0, 0.0, 0.0), SimTime::ZERO), Err(Error::NoRecords)));
    }

    #[test]
    fn boundary_distance_does_not_switch() {
        let mut bg = BackgroundState::new(10.0, 6.0).unwrap();
        let mut buf = RecordBuffer::new(4).unwrap();
        buf.store(rec(0, 0.0), None);
        bg.select(&buf, &Pose2D::new(1.0, 0.0, 0.0), SimTime::ZERO).unwrap();
        buf.store(rec(1, 3.0), bg.active_id());
        let sel = bg.select(&buf, &Pose2D::new(10.0, 0.0, 0.0), SimTime::from_secs(5.0)).unwrap();
        assert_eq!(sel, Selection::Kept);
        assert_eq!(bg.active_id(), Some(0));
    }

    #[test]
    fn switches_to_single_qualifying_record() {
        let mut bg = BackgroundState::new(10.0, 6.0).unwrap();
        let mut buf = RecordBuffer::new(8).unwrap();
        buf.store(rec(0, 0.0), None);
        bg.select(&buf, &Pose2D::new(0.5, 0.0, 0.0), SimTime::ZERO).unwrap();
        // only record 1 is >= 6 m from the robot at x = 10.5
        buf.store(rec(1, 4.0), bg.active_id());
        buf.store(rec(2, 8.0), bg.active_id());
        let now = SimTime::from_secs(12.0);
        let sel = bg.select(&buf, &Pose2D::new(10.5, 0.0, 0.0), now).unwrap();
        assert_eq!(sel, Selection::Switched { from: Some(0), to: 1 });
        assert_eq!(bg.last_switch_time, Some(now));
    }

    #[test]
    fn falls_back_to_latest() {
        let mut bg = BackgroundState::new(10.0, 6.0).unwrap();
        let mut buf = RecordBuffer::new(8).unwrap();
        buf.store(rec(0, 0.0), None);
        buf.store(rec(1, 1.0), None);
        let sel = bg.select(&buf, &Pose2D::new(1.5, 0.0, 0.0), SimTime::ZERO).unwrap();
        assert_eq!(sel, Selection::Switched { from: None, to: 1 });
    }

    #[test]
    fn invalid_thresholds() {
        assert!(BackgroundState::new(5.0, 6.0).is_err());
        assert!(BackgroundState::new(5.0, 0.0).is_err());
    }
}
