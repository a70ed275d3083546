//! Operation counters for the cost accounting of each protocol phase.

use serde::{Deserialize, Serialize};

/// Counts scalar multiplications (SM) and assignment operations (AS).
///
/// A meter has a single owner. Pass it by `&mut` into each metered call; to
/// measure a phase in isolation, start from a fresh meter or take a
/// [`CostMeter::snapshot`] before and diff afterwards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostMeter {
    sm: u64,
    #[serde(rename = "as")]
    assignments: u64,
}

impl CostMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(sm: u64, assignments: u64) -> Self {
        CostMeter { sm, assignments }
    }

    pub fn sm(&self) -> u64 {
        self.sm
    }

    pub fn assignments(&self) -> u64 {
        self.assignments
    }

    pub fn add_sm(&mut self, n: u64) {
        self.sm += n;
    }

    pub fn add_as(&mut self, n: u64) {
        self.assignments += n;
    }

    pub fn snapshot(&self) -> CostMeter {
        *self
    }

    /// Counts accumulated since `earlier` was taken from this meter.
    pub fn since(&self, earlier: &CostMeter) -> CostMeter {
        CostMeter {
            sm: self.sm - earlier.sm,
            assignments: self.assignments - earlier.assignments,
        }
    }
}
