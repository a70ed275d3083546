//! Closed-form operation counts for each protocol phase.
//!
//! The `*_sm` / `*_as` functions describe exactly what this crate's
//! implementation records on a [`CostMeter`]. [`PublishedCounts`] holds the
//! figures from the original efficiency table so reports can print both side
//! by side; the two disagree in places (see the notes on each field).

use serde::{Deserialize, Serialize};

use crate::matrix::inverse_sm;
use crate::meter::CostMeter;

/// Protocol phase, plus the local baseline that outsourcing replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    ProbGen,
    Compute,
    Verify,
    Recover,
    LocalSolve,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::ProbGen, Phase::Compute, Phase::Verify, Phase::Recover, Phase::LocalSolve];

    pub fn name(self) -> &'static str {
        match self {
            Phase::ProbGen => "ProbGen",
            Phase::Compute => "Compute",
            Phase::Verify => "Verify",
            Phase::Recover => "Recover",
            Phase::LocalSolve => "LocalSolve",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Phase::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

fn u(x: usize) -> u64 {
    x as u64
}

/// Column ops on `X` (m × n) and row ops on `Xᵀ` (n × m): each ScaleAll costs
/// `mn`, each AddMultiple `m`, so `2mn + 2(k−2)m`.
pub fn probgen_sm(m: usize, n: usize, k: usize) -> u64 {
    2 * u(m) * u(n) + 2 * u(k - 2) * u(m)
}

/// One permutation per side.
pub fn probgen_as(m: usize, n: usize) -> u64 {
    2 * u(m) * u(n)
}

/// `X₂X₁` (mn²), Gauss–Jordan inverse, and `(·)⁻¹X₂` (n²m).
pub fn compute_sm(m: usize, n: usize) -> u64 {
    2 * u(m) * u(n) * u(n) + inverse_sm(n)
}

pub fn verify_sm(m: usize, n: usize, rounds: usize) -> u64 {
    3 * u(m) * u(n) * u(rounds)
}

/// Row ops on `R′` (n × m): ScaleAll `mn`, each AddMultiple `m`; then `R·y`
/// costs `mn`. Total `2mn + (k−2)m`.
pub fn recover_sm(m: usize, n: usize, k: usize) -> u64 {
    2 * u(m) * u(n) + u(k - 2) * u(m)
}

pub fn recover_as(m: usize, n: usize) -> u64 {
    u(m) * u(n)
}

/// `R′y` (mn), then ScaleAll on a length-`n` vector and one SM per AddMultiple.
pub fn recover_fast_sm(m: usize, n: usize, k: usize) -> u64 {
    u(m) * u(n) + u(n) + u(k - 2)
}

pub fn recover_fast_as(n: usize) -> u64 {
    u(n)
}

/// `XᵀX` (mn²), inverse, `(·)⁻¹Xᵀ` (n²m), and the final `·y` (mn).
pub fn local_solve_sm(m: usize, n: usize) -> u64 {
    2 * u(m) * u(n) * u(n) + inverse_sm(n) + u(m) * u(n)
}

/// Documented counts for `phase` on an `m × n` input with `k` ops per side.
pub fn documented(phase: Phase, m: usize, n: usize, k: usize, rounds: usize) -> CostMeter {
    match phase {
        Phase::ProbGen => CostMeter::from_counts(probgen_sm(m, n, k), probgen_as(m, n)),
        Phase::Compute => CostMeter::from_counts(compute_sm(m, n), 0),
        Phase::Verify => CostMeter::from_counts(verify_sm(m, n, rounds), 0),
        Phase::Recover => CostMeter::from_counts(recover_sm(m, n, k), recover_as(m, n)),
        Phase::LocalSolve => CostMeter::from_counts(local_solve_sm(m, n), 0),
    }
}

/// The originally published per-phase counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PublishedCounts {
    /// `2(k−1)mn + (k−2)(m+n)`; charges each AddMultiple as a full pass.
    pub probgen_sm: u64,
    pub probgen_as: u64,
    /// `m²n + n³ + mn²`; naive counting of `(X₂X₁)⁻¹X₂` gives `2mn² + O(n³)`.
    pub compute_sm: u64,
    pub verify_sm: u64,
    /// Table form `kmn + (k−2)n`.
    pub recover_sm_table: u64,
    /// Prose form `(k−1)mn + (k−2)n`.
    pub recover_sm_text: u64,
    pub recover_as: u64,
}

impl PublishedCounts {
    pub fn new(m: usize, n: usize, k: usize) -> Self {
        let (m, n, k) = (u(m), u(n), u(k));
        PublishedCounts {
            probgen_sm: 2 * (k - 1) * m * n + (k - 2) * (m + n),
            probgen_as: 2 * m * n,
            compute_sm: m * m * n + n * n * n + m * n * n,
            verify_sm: 3 * m * n,
            recover_sm_table: k * m * n + (k - 2) * n,
            recover_sm_text: (k - 1) * m * n + (k - 2) * n,
            recover_as: m * n,
        }
    }

    /// Published client-to-worker efficiency ratio,
    /// `(3(k−1)mn + (k−2)(m+2n)) / (m²n + n³ + mn²)`.
    pub fn efficiency_ratio(m: usize, n: usize, k: usize) -> f64 {
        let (m, n, k) = (m as f64, n as f64, k as f64);
        (3.0 * (k - 1.0) * m * n + (k - 2.0) * (m + 2.0 * n)) / (m * m * n + n * n * n + m * n * n)
    }
}

/// Documented client SM (ProbGen + Recover) over local-solve SM.
pub fn documented_efficiency_ratio(m: usize, n: usize, k: usize) -> f64 {
    (probgen_sm(m, n, k) + recover_sm(m, n, k)) as f64 / local_solve_sm(m, n) as f64
}

/// Scalars and bytes exchanged between client and worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSizes {
    /// `X₁` and `X₂`: `2mn` scalars.
    pub upload_scalars: u64,
    /// `R′`: `nm` scalars.
    pub download_scalars: u64,
    pub upload_bytes: u64,
    pub download_bytes: u64,
}

/// Verify and Recover run locally on already-published data and add nothing.
pub fn message_sizes(m: usize, n: usize, scalar_bytes: usize) -> MessageSizes {
    let up = 2 * u(m) * u(n);
    let down = u(m) * u(n);
    MessageSizes {
        upload_scalars: up,
        download_scalars: down,
        upload_bytes: up * u(scalar_bytes),
        download_bytes: down * u(scalar_bytes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_counts_small_case() {
        let p = PublishedCounts::new(3, 2, 4);
        assert_eq!(p.probgen_sm, 2 * 3 * 6 + 2 * 5);
        assert_eq!(p.compute_sm, 18 + 8 + 12);
        assert_eq!(p.verify_sm, 18);
        assert_eq!(p.recover_sm_table, 24 + 4);
        assert_eq!(p.recover_sm_text, 18 + 4);
    }

    #[test]
    fn phase_names_round_trip() {
        for p in Phase::ALL {
            assert_eq!(p.name().parse::<Phase>().unwrap(), p);
        }
    }

    #[test]
    fn message_sizes_for_f64() {
        let s = message_sizes(4, 3, 8);
        assert_eq!((s.upload_scalars, s.download_scalars), (24, 12));
        assert_eq!((s.upload_bytes, s.download_bytes), (192, 96));
    }

    #[test]
    fn efficiency_ratio_shrinks_with_size() {
        assert!(documented_efficiency_ratio(1000, 1000, 8) < documented_efficiency_ratio(100, 100, 8));
        assert!(PublishedCounts::efficiency_ratio(1000, 1000, 8) < PublishedCounts::efficiency_ratio(100, 100, 8));
    }
}
