//! Simulation clock.
//!
//! Time is kept in integer microseconds so that channel gating and delivery
//! instants land exactly on the tick grid (0.02 s, 1.4 s, 1.9 s, ...).

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: i64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: i64) -> Self {
        SimTime(ms * 1_000)
    }

    /// Rounds to the nearest microsecond.
    pub fn from_secs(s: f64) -> Self {
        SimTime((s * 1e6).round() as i64)
    }

    pub const fn as_micros(self) -> i64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_secs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secs_round_trip_on_tick_grid() {
        let dt = SimTime::from_secs(0.02);
        assert_eq!(dt.as_micros(), 20_000);
        let mut t = SimTime::ZERO;
        for _ in 0..95 {
            t += dt;
        }
        assert_eq!(t, SimTime::from_secs(1.9));
        assert_eq!(t.to_string(), "1.9");
    }
}
