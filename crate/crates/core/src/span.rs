use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open time interval in seconds, `0 <= start_s < end_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start_s: f64,
    pub end_s: f64,
}

impl TimeSpan {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self> {
        if !(start_s >= 0.0 && end_s > start_s && end_s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid time span [{start_s}, {end_s}]"
            )));
        }
        Ok(Self { start_s, end_s })
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn intersection_s(&self, other: &TimeSpan) -> f64 {
        (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0)
    }

    pub fn overlaps(&self, other: &TimeSpan) -> bool {
        self.start_s < other.end_s && other.start_s < self.end_s
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s
    }
}
