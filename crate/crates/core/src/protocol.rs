//! JSON messages exchanged with the operator console, one object per
//! WebSocket text message, discriminated by `"type"`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::compositor::Mode;
use crate::frame::Frame;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameDiag {
    /// Zoom-law depth in metres, absent when no zoom was applied.
    pub d: Option<f64>,
    /// Displayed vertical field of view in radians.
    pub theta: f64,
    pub record_id: Option<u64>,
    #[serde(default)]
    pub switched: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    /// Simulated time in seconds.
    pub t: f64,
    /// Base64 of a binary PPM (P6) image.
    pub png_or_ppm_b64: String,
    pub mode: Mode,
    pub diag: FrameDiag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigMessage {
    pub mode: Mode,
    pub preset: String,
    pub width: u32,
    pub height: u32,
    /// Seconds.
    pub image_interval: f64,
    pub data_interval: f64,
    pub max_steering: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Frame(FrameMessage),
    /// Throttle in `[-1, 1]`, steering target in radians.
    Cmd {
        throttle: f64,
        steering: f64,
    },
    Mode {
        value: Mode,
    },
    Config(ConfigMessage),
}

impl Message {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn encode_frame(frame: &Frame) -> String {
    STANDARD.encode(frame.to_ppm())
}

pub fn decode_frame(b64: &str) -> Result<Frame> {
    let bytes = STANDARD.decode(b64).map_err(|e| crate::Error::parse("frame payload", e.to_string()))?;
    Frame::from_ppm(&bytes)
}
