//! Radius-dependent sample-count and tolerance schedules.

use serde::{Deserialize, Serialize};

/// How many samples to draw as a function of the trust-region radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountPolicy {
    /// The same count every iteration.
    Fixed { count: usize },
    /// `clamp(ceil(coef * max(delta^-exponent, 1)), min, max)`.
    ///
    /// `min = None` uses the caller's floor.
    Scaled {
        coef: f64,
        exponent: f64,
        min: Option<usize>,
        max: usize,
    },
}

impl CountPolicy {
    pub fn fixed(count: usize) -> Self {
        CountPolicy::Fixed { count }
    }

    /// Count at radius `delta`; `default_min` applies when `min` is unset.
    pub fn count(&self, delta: f64, default_min: usize) -> usize {
        match *self {
            CountPolicy::Fixed { count } => count,
            CountPolicy::Scaled {
                coef,
                exponent,
                min,
                max,
            } => {
                let lo = min.unwrap_or(default_min);
                let raw = (coef * delta.powf(-exponent).max(1.0)).ceil();
                let raw = if raw.is_finite() {
                    raw.min(usize::MAX as f64) as usize
                } else {
                    max
                };
                raw.clamp(lo, max.max(lo))
            }
        }
    }

    pub(crate) fn validate(&self, name: &str) -> Result<(), String> {
        match *self {
            CountPolicy::Fixed { count: 0 } => Err(format!("{name}: count must be >= 1")),
            CountPolicy::Scaled { coef, max, .. } if !(coef > 0.0) || max == 0 => {
                Err(format!("{name}: coef must be > 0 and max >= 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Inner-solve tolerance `max(coef * min(delta, delta^2), floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSchedule {
    pub coef: f64,
    pub floor: f64,
}

impl Default for ToleranceSchedule {
    fn default() -> Self {
        ToleranceSchedule {
            coef: 0.1,
            floor: 1e-12,
        }
    }
}

impl ToleranceSchedule {
    pub fn epsilon(&self, delta: f64) -> f64 {
        (self.coef * delta.min(delta * delta)).max(self.floor)
    }
}
