//! Continuous time windows and interval arithmetic.
//!
//! All times are real-valued seconds. Feasibility checks throughout the crate
//! are inequality-based; nothing is discretized.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Slack applied to feasibility comparisons so that start times sitting
/// exactly on a computed boundary survive floating-point rounding. Anything
/// within one nanosecond counts as on-time; the serialization contract
/// guarantees the same precision.
pub const TIME_EPS: f64 = 1e-9;

/// A closed interval `[start, end]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    /// Builds a window, rejecting `start > end` and non-finite bounds.
    pub fn new(start: f64, end: f64) -> Result<Self, ModelError> {
        if !start.is_finite() || !end.is_finite() || start > end {
            return Err(ModelError::BadWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// Like [`TimeWindow::new`] but panics; for literals in tests and fixtures.
    pub fn of(start: f64, end: f64) -> Self {
        Self::new(start, end).expect("well-formed window")
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn contains_window(&self, other: &TimeWindow) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// True when the closed intervals share more than a single point.
    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// True when the closed intervals share at least one point.
    pub fn touches(&self, other: &TimeWindow) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn intersect(&self, other: &TimeWindow) -> Option<TimeWindow> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then_some(TimeWindow { start, end })
    }

    /// Latest start such that an activity of `duration` still ends inside the window.
    pub fn latest_start(&self, duration: f64) -> Option<f64> {
        let t = self.end - duration;
        (t >= self.start).then_some(t)
    }

    /// Whether an activity of `duration` fits somewhere inside the window.
    pub fn fits(&self, duration: f64) -> bool {
        self.length() >= duration
    }

    /// Shrinks both ends, returning `None` when the window vanishes.
    pub fn shrink(&self, left: f64, right: f64) -> Option<TimeWindow> {
        let start = self.start + left;
        let end = self.end - right;
        (start <= end).then_some(TimeWindow { start, end })
    }
}

/// Subtracts `holes` from `base`, returning the remaining sub-intervals in
/// ascending order. Degenerate (zero-length) leftovers are kept; callers
/// filter by duration when placing activities.
pub fn subtract_intervals(base: TimeWindow, holes: &[TimeWindow]) -> Vec<TimeWindow> {
    let mut sorted: Vec<TimeWindow> = holes
        .iter()
        .filter(|h| h.overlaps(&base))
        .copied()
        .collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start));

    let mut free = Vec::new();
    let mut cursor = base.start;
    for hole in sorted {
        if hole.start > cursor {
            free.push(TimeWindow {
                start: cursor,
                end: hole.start.min(base.end),
            });
        }
        cursor = cursor.max(hole.end);
        if cursor >= base.end {
            break;
        }
    }
    if cursor < base.end {
        free.push(TimeWindow {
            start: cursor,
            end: base.end,
        });
    }
    free
}
