use std::collections::VecDeque;
use std::sync::Arc;

use crate::frame::Frame;
use crate::geometry::{CameraIntrinsics, CameraPose, Pose2D};
use crate::time::SimTime;
use crate::{Error, Result};

/// A delivered frame together with the pose reported at capture.
#[derive(Clone, Debug)]
pub struct PastImageRecord {
    pub id: u64,
    pub frame: Arc<Frame>,
    pub capture_pose: Pose2D,
    pub capture_camera: CameraPose,
    pub capture_fov: f64,
    pub capture_time: SimTime,
}

impl PastImageRecord {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics { vertical_fov: self.capture_fov, width: self.frame.width(), height: self.frame.height() }
    }
}

/// Bounded FIFO of records ordered by capture time.
#[derive(Clone, Debug)]
pub struct RecordBuffer {
    records: VecDeque<Arc<PastImageRecord>>,
    capacity: usize,
}

impl RecordBuffer {
    /// Capacity must be at least 2 so that a protected (active) record never
    /// blocks new arrivals.
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::invalid("record buffer capacity must be at least 2"));
        }
        Ok(RecordBuffer { records: VecDeque::with_capacity(capacity + 1), capacity })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Arc<PastImageRecord>> {
        self.records.iter()
    }

    pub fn latest(&self) -> Option<&Arc<PastImageRecord>> {
        self.records.back()
    }

    pub fn get(&self, id: u64) -> Option<&Arc<PastImageRecord>> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Inserts `record` and evicts the oldest entries beyond capacity,
    /// skipping the record with id `protect`.
    pub fn store(&mut self, record: Arc<PastImageRecord>, protect: Option<u64>) {
        let at = self.records.partition_point(|r| r.capture_time <= record.capture_time);
        self.records.insert(at, record);
        while self.records.len() > self.capacity {
            let victim = self.records.iter().position(|r| Some(r.id) != protect);
            match victim {
                Some(i) => {
                    self.records.remove(i);
                }
                None => break,
            }
        }
    }
}
