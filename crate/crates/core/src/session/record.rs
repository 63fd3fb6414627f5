//! Everything a session leaves behind, and its on-disk form.
//!
//! A record directory holds `config.json`, `commands.csv`, `runlog.csv`,
//! `diagnostics.csv`, `deliveries.csv` and `events.jsonl`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SessionConfig;
use crate::compositor::Mode;
use crate::metrics::RunLog;
use crate::time::SimTime;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandLogEntry {
    pub seq: u64,
    pub issued: SimTime,
    /// When the command reaches the vehicle and takes effect.
    pub deliver: SimTime,
    pub throttle: f64,
    pub steering: f64,
}

/// One row per tick that had something to display.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: SimTime,
    pub mode: Mode,
    pub record_id: Option<u64>,
    pub d: Option<f64>,
    pub theta: f64,
    pub switched: bool,
    pub zoom_clamped: bool,
    /// Pose the CG model is drawn at (the telemetry pose).
    pub cg_x: Option<f64>,
    pub cg_y: Option<f64>,
    pub cg_heading: Option<f64>,
    pub cg_height_px: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Image,
    Telemetry,
    Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRow {
    pub kind: MessageKind,
    pub seq: u64,
    pub send_time: SimTime,
    pub deliver_time: SimTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    BackgroundSwitch { t: SimTime, from: Option<u64>, to: u64 },
    DegenerateZoom { t: SimTime, d: f64 },
    CourseDeparture { t: SimTime, distance: f64 },
    CourseReturn { t: SimTime },
    LapCompleted { t: SimTime, lap: u32 },
    HorizonTimeout { t: SimTime },
    ModeChange { t: SimTime, mode: Mode },
    Disconnected { t: SimTime },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionRecord {
    pub config: SessionConfig,
    pub commands: Vec<CommandLogEntry>,
    pub runlog: RunLog,
    pub diagnostics: Vec<DiagnosticRow>,
    pub deliveries: Vec<DeliveryRow>,
    pub events: Vec<Event>,
}

fn to_csv<T: Serialize>(rows: &[T], header: &str) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn from_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(bytes);
    r.deserialize().map(|row| Ok(row?)).collect()
}

const COMMAND_HEADER: &str = "seq,issued,deliver,throttle,steering";
const DIAG_HEADER: &str = "t,mode,record_id,d,theta,switched,zoom_clamped,cg_x,cg_y,cg_heading,cg_height_px";
const DELIVERY_HEADER: &str = "kind,seq,send_time,deliver_time";

impl SessionRecord {
    pub fn new(config: SessionConfig) -> Self {
        SessionRecord {
            config,
            commands: Vec::new(),
            runlog: RunLog::new(),
            diagnostics: Vec::new(),
            deliveries: Vec::new(),
            events: Vec::new(),
        }
    }

    /// File name and serialized contents, in a fixed order.
    pub fn files(&self) -> Result<Vec<(&'static str, Vec<u8>)>> {
        let mut events = Vec::new();
        for e in &self.events {
            serde_json::to_writer(&mut events, e)?;
            events.push(b'\n');
        }
        let mut config = serde_json::to_vec_pretty(&self.config)?;
        config.push(b'\n');
        Ok(vec![
            ("config.json", config),
            ("commands.csv", to_csv(&self.commands, COMMAND_HEADER)?),
            ("runlog.csv", self.runlog.to_csv_string().into_bytes()),
            ("diagnostics.csv", to_csv(&self.diagnostics, DIAG_HEADER)?),
            ("deliveries.csv", to_csv(&self.deliveries, DELIVERY_HEADER)?),
            ("events.jsonl", events),
        ])
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (name, bytes) in self.files()? {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| fs::read(dir.join(name));
        let events = String::from_utf8_lossy(&read("events.jsonl")?)
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect::<Result<Vec<Event>>>()?;
        Ok(SessionRecord {
            config: serde_json::from_slice(&read("config.json")?)?,
            commands: from_csv(&read("commands.csv")?)?,
            runlog: RunLog::read_csv(&read("runlog.csv")?[..])?,
            diagnostics: from_csv(&read("diagnostics.csv")?)?,
            deliveries: from_csv(&read("deliveries.csv")?)?,
            events,
        })
    }

    pub fn switch_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::BackgroundSwitch { from: Some(_), .. })).count()
    }

    pub fn laps_completed(&self) -> u32 {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::LapCompleted { lap, .. } => Some(*lap),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}
