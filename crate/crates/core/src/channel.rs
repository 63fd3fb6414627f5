//! Narrow-band link emulation on the simulated clock.
//!
//! Each message class (image, telemetry, command) is gated by a minimum
//! emission interval and delivered after a fixed delay. Deliveries come out
//! in `(deliver_time, send_time, insertion)` order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::time::SimTime;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelPreset {
    pub name: String,
    pub jpeg_quality: u8,
    pub image_width: u32,
    pub image_height: u32,
    pub image_interval: SimTime,
    pub image_delay: SimTime,
    pub data_interval: SimTime,
    pub data_delay: SimTime,
    pub command_delay: SimTime,
}

impl ChannelPreset {
    pub fn front_camera() -> Self {
        ChannelPreset {
            name: "front-camera".into(),
            jpeg_quality: 15,
            image_width: 640,
            image_height: 480,
            image_interval: SimTime::from_millis(700),
            image_delay: SimTime::from_millis(1200),
            data_interval: SimTime::from_millis(20),
            data_delay: SimTime::from_millis(500),
            command_delay: SimTime::from_millis(500),
        }
    }

    /// Shared by the existing and the extended past-image interface.
    pub fn spir() -> Self {
        ChannelPreset {
            name: "spir".into(),
            jpeg_quality: 50,
            image_width: 640,
            image_height: 480,
            image_interval: SimTime::from_millis(1400),
            image_delay: SimTime::from_millis(1900),
            data_interval: SimTime::from_millis(20),
            data_delay: SimTime::from_millis(500),
            command_delay: SimTime::from_millis(500),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "front-camera" => Ok(Self::front_camera()),
            "spir" => Ok(Self::spir()),
            other => Err(Error::UnknownName { kind: "preset", value: other.to_string() }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.image_interval, self.data_interval];
        let non_negative = [self.image_delay, self.data_delay, self.command_delay];
        if positive.iter().any(|t| *t <= SimTime::ZERO) {
            return Err(Error::invalid("channel intervals must be positive"));
        }
        if non_negative.iter().any(|t| *t < SimTime::ZERO) {
            return Err(Error::invalid("channel delays must be non-negative"));
        }
        if !(1..=100).contains(&self.jpeg_quality) {
            return Err(Error::invalid("jpeg quality must be in 1..=100"));
        }
        Ok(())
    }

    pub fn image_class(&self) -> MessageClass {
        MessageClass::new(self.image_interval, self.image_delay)
    }

    pub fn telemetry_class(&self) -> MessageClass {
        MessageClass::new(self.data_interval, self.data_delay)
    }

    pub fn command_class(&self) -> MessageClass {
        MessageClass::new(self.data_interval, self.command_delay)
    }
}

/// Optional bounded, seeded delivery jitter. Off by default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub max: SimTime,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageClass {
    pub interval: SimTime,
    pub delay: SimTime,
    pub jitter: Option<Jitter>,
}

impl MessageClass {
    pub fn new(interval: SimTime, delay: SimTime) -> Self {
        MessageClass { interval, delay, jitter: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedMessage<T> {
    pub payload: T,
    pub send_time: SimTime,
    pub deliver_time: SimTime,
    pub seq: u64,
}

impl<T> TimedMessage<T> {
    fn key(&self) -> (SimTime, SimTime, u64) {
        (self.deliver_time, self.send_time, self.seq)
    }
}

/// Send/deliver stamp of an accepted message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stamp {
    pub seq: u64,
    pub send_time: SimTime,
    pub deliver_time: SimTime,
}

#[derive(Debug)]
pub struct ChannelQueue<T> {
    class: MessageClass,
    pending: Vec<TimedMessage<T>>,
    last_emission: Option<SimTime>,
    next_seq: u64,
    jitter_rng: Option<ChaCha8Rng>,
}

impl<T> ChannelQueue<T> {
    pub fn new(class: MessageClass) -> Self {
        ChannelQueue {
            class,
            pending: Vec::new(),
            last_emission: None,
            next_seq: 0,
            jitter_rng: class.jitter.map(|j| ChaCha8Rng::seed_from_u64(j.seed)),
        }
    }

    pub fn class(&self) -> &MessageClass {
        &self.class
    }

    pub fn is_due(&self, now: SimTime) -> bool {
        self.last_emission.is_none_or(|last| now - last >= self.class.interval)
    }

    /// Emits a message built by `producer` if the class interval has elapsed
    /// since the previous emission. The producer only runs when it does.
    pub fn maybe_capture(&mut self, now: SimTime, producer: impl FnOnce() -> T) -> Option<Stamp> {
        if !self.is_due(now) {
            return None;
        }
        self.last_emission = Some(now);
        Some(self.push(now, producer()))
    }

    /// Enqueues without interval gating.
    pub fn push(&mut self, send_time: SimTime, payload: T) -> Stamp {
        let mut deliver_time = send_time + self.class.delay;
        if let (Some(j), Some(rng)) = (self.class.jitter, self.jitter_rng.as_mut()) {
            deliver_time += SimTime::from_micros(rng.random_range(0..=j.max.as_micros()));
        }
        let msg = TimedMessage { payload, send_time, deliver_time, seq: self.next_seq };
        self.next_seq += 1;
        let key = msg.key();
        let at = self.pending.partition_point(|m| m.key() <= key);
        self.pending.insert(at, msg);
        Stamp { seq: key.2, send_time, deliver_time }
    }

    /// Removes and returns every message with `deliver_time <= now`.
    pub fn poll(&mut self, now: SimTime) -> Vec<TimedMessage<T>> {
        let n = self.pending.partition_point(|m| m.deliver_time <= now);
        self.pending.drain(..n).collect()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }
}

/// Bytes reserved for container headers in the size model.
pub const PAYLOAD_HEADER_BYTES: u64 = 623;

/// Stand-in for an encoded image size:
/// `PAYLOAD_HEADER_BYTES + pixels * (10 + 3 * quality) / 800` (integer
/// division), i.e. 0.1 bit/pixel plus 0.03 bit/pixel per quality step.
/// Only the frame dimensions matter; content is ignored.
pub fn payload_size_model(frame: &Frame, quality: u8) -> Result<u64> {
    payload_size_for_pixels(frame.pixel_count(), quality)
}

pub fn payload_size_for_pixels(pixels: u64, quality: u8) -> Result<u64> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!("quality {quality} outside 1..=100")));
    }
    Ok(PAYLOAD_HEADER_BYTES + pixels * (10 + 3 * quality as u64) / 800)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Rgb;

    fn ticks(n: i64) -> impl Iterator<Item = SimTime> {
        (0..n).map(|i| SimTime::from_millis(20 * i))
    }

    #[test]
    fn spir_capture_schedule() {
        let preset = ChannelPreset::spir();
        let mut q = ChannelQueue::new(preset.image_class());
        let mut sends = Vec::new();
        for t in ticks(300) {
            if let Some(s) = q.maybe_capture(t, || ()) {
                sends.push(s);
            }
        }
        let times: Vec<f64> = sends.iter().map(|s| s.send_time.as_secs()).collect();
        assert_eq!(&times[..5], &[0.0, 1.4, 2.8, 4.2, 5.6]);
        let at_2_8 = sends.iter().find(|s| s.send_time == SimTime::from_millis(2800)).unwrap();
        assert_eq!(at_2_8.deliver_time, SimTime::from_millis(4700));
    }

    #[test]
    fn zero_delay_delivers_immediately() {
        let mut q = ChannelQueue::new(MessageClass::new(SimTime::from_millis(20), SimTime::ZERO));
        let s = q.maybe_capture(SimTime::from_millis(40), || 1).unwrap();
        assert_eq!(s.deliver_time, s.send_time);
        assert_eq!(q.poll(SimTime::from_millis(40)).len(), 1);
    }

    #[test]
    fn poll_empty_and_ties() {
        let mut q: ChannelQueue<&str> =
            ChannelQueue::new(MessageClass::new(SimTime::from_millis(1), SimTime::from_millis(100)));
        assert!(q.poll(SimTime::from_secs(10.0)).is_empty());
        q.push(SimTime::from_millis(10), "a");
        q.push(SimTime::from_millis(10), "b");
        let out = q.poll(SimTime::from_millis(110));
        assert_eq!(out.iter().map(|m| m.payload).collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn emission_count_over_horizon() {
        for preset in [ChannelPreset::spir(), ChannelPreset::front_camera()] {
            for class in [preset.image_class(), preset.telemetry_class()] {
                let mut q = ChannelQueue::new(class);
                let horizon = SimTime::from_secs(60.0);
                let n = (horizon.as_micros() / 20_000) + 1;
                let count = ticks(n).filter(|&t| q.maybe_capture(t, || ()).is_some()).count() as i64;
                assert_eq!(count, horizon.as_micros() / class.interval.as_micros() + 1);
            }
        }
    }

    #[test]
    fn jitter_is_bounded_and_seeded() {
        let mut class = MessageClass::new(SimTime::from_millis(20), SimTime::from_millis(500));
        class.jitter = Some(Jitter { max: SimTime::from_millis(30), seed: 3 });
        let run = || {
            let mut q = ChannelQueue::new(class);
            ticks(200).filter_map(|t| q.maybe_capture(t, || ())).map(|s| s.deliver_time).collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        for (i, d) in a.iter().enumerate() {
            let lag = *d - SimTime::from_millis(20 * i as i64);
            assert!(lag >= SimTime::from_millis(500) && lag <= SimTime::from_millis(530));
        }
    }

    #[test]
    fn size_model() {
        let f = Frame::new(640, 480, Rgb::SKY);
        let lo = payload_size_model(&f, 15).unwrap();
        let hi = payload_size_model(&f, 50).unwrap();
        assert!(lo <= hi);
        assert_eq!(hi, 623 + 307_200 * 160 / 800);
        assert_eq!(payload_size_model(&Frame::new(0, 0, Rgb::SKY), 50).unwrap(), PAYLOAD_HEADER_BYTES);
        assert!(payload_size_model(&f, 0).is_err());
        assert!(payload_size_model(&f, 101).is_err());
    }
}
