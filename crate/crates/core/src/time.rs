//! Simulation time.
//!
//! Time is kept as an integer count of microseconds so that frame boundaries,
//! deadlines and claim values compare exactly. Configuration files and CSV
//! output speak milliseconds.

use core::fmt;
use core::ops::{Add, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A point in (or span of) simulated time, in microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    /// Rounds to the nearest microsecond. Returns `None` for negative or
    /// non-finite input.
    pub fn from_millis_f64(ms: f64) -> Option<Self> {
        if !ms.is_finite() || ms < 0.0 {
            return None;
        }
        let us = libm::round(ms * 1_000.0);
        if us > u64::MAX as f64 {
            return None;
        }
        Some(SimTime(us as u64))
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

/// Formats as milliseconds with exactly three decimals, e.g. `12.500`.
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1_000, self.0 % 1_000)
    }
}

impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_millis_f64())
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ms = f64::deserialize(deserializer)?;
        SimTime::from_millis_f64(ms)
            .ok_or_else(|| serde::de::Error::custom("time must be a finite, non-negative number of milliseconds"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn display_is_fixed_point_millis() {
        assert_eq!(SimTime::from_micros(12_500).to_string(), "12.500");
        assert_eq!(SimTime::from_micros(7).to_string(), "0.007");
        assert_eq!(SimTime::ZERO.to_string(), "0.000");
    }

    #[test]
    fn millis_conversion_rounds() {
        assert_eq!(SimTime::from_millis_f64(12.5), Some(SimTime(12_500)));
        assert_eq!(SimTime::from_millis_f64(0.0004), Some(SimTime(0)));
        assert_eq!(SimTime::from_millis_f64(-1.0), None);
        assert_eq!(SimTime::from_millis_f64(f64::NAN), None);
    }
}
