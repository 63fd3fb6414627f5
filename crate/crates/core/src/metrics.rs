//! Per-run driving metrics.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compositor::Mode;
use crate::course::Course;
use crate::time::SimTime;
use crate::{Error, Result};

pub const RUNLOG_HEADER: &str = "t,x,y,heading,speed,steering,mode";

/// Ground-truth sample taken once per tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub t: SimTime,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub steering: f64,
    pub mode: Mode,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
    steering: f64,
    mode: Mode,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    samples: Vec<RunSample>,
}

impl RunLog {
    pub fn new() -> Self {
        RunLog::default()
    }

    /// Timestamps must be strictly increasing.
    pub fn push(&mut self, sample: RunSample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if sample.t <= last.t {
                return Err(Error::invalid(format!("run log time went from {} to {}", last.t, sample.t)));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[RunSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> SimTime {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => SimTime::ZERO,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(RUNLOG_HEADER.split(','))?;
        for s in &self.samples {
            out.serialize(CsvRow {
                t: s.t.as_secs(),
                x: s.x,
                y: s.y,
                heading: s.heading,
                speed: s.speed,
                steering: s.steering,
                mode: s.mode,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header.join(",") != RUNLOG_HEADER {
            return Err(Error::parse("run log", format!("unexpected header {:?}", header.join(","))));
        }
        let mut log = RunLog::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            log.push(RunSample {
                t: SimTime::from_secs(row.t),
                x: row.x,
                y: row.y,
                heading: row.heading,
                speed: row.speed,
                steering: row.steering,
                mode: row.mode,
            })?;
        }
        Ok(log)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        RunLog::read_csv(std::fs::File::open(path)?)
    }
}

impl FromIterator<RunSample> for RunLog {
    /// Panics on non-increasing timestamps.
    fn from_iter<I: IntoIterator<Item = RunSample>>(iter: I) -> Self {
        let mut log = RunLog::new();
        for s in iter {
            log.push(s).expect("strictly increasing timestamps");
        }
        log
    }
}

/// Path length over elapsed time.
pub fn average_speed(log: &RunLog) -> Result<f64> {
    let s = log.samples();
    if s.len() < 2 {
        return Err(Error::EmptyLog);
    }
    let path: f64 = s.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum();
    Ok(path / log.duration().as_secs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionError {
    pub sum: f64,
    pub mean: f64,
}

/// Nearest distance from each sample to the closed centerline, summed and
/// averaged.
pub fn position_error(log: &RunLog, course: &Course) -> Result<PositionError> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let sum: f64 = log.samples().iter().map(|s| course.distance_to_centerline(nalgebra::Vector2::new(s.x, s.y))).sum();
    Ok(PositionError { sum, mean: sum / log.len() as f64 })
}
