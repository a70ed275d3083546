//! Public, secret-free result check.
//!
//! Given the published `X₁` (m × n), `X₂` (n × m) and the worker's `R′`
//! (n × m), each round draws a row vector `r ∈ [-1, 1]ⁿ` and compares
//!
//! ```text
//! V₁ = r · X₂        V₂ = V₁ · X₁        V₁  vs  V₂ · R′
//! ```
//!
//! An honest `R′ = (X₂X₁)⁻¹X₂` satisfies `V₂R′ = rX₂X₁(X₂X₁)⁻¹X₂ = V₁`.
//!
//! Over the reals a single round rejects every wrong `R′` except on a
//! measure-zero set of `r`. In floating point the check is a tolerance test,
//! so detection is certain only for tampers whose effect on `V₂R′` exceeds
//! `tol`; tiny tampers aligned with the rounding noise can slip through.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mat_mul, random_matrix, Matrix};
use crate::meter::CostMeter;
use crate::rng::derive_seed;
use crate::scalar::Scalar;

pub const DEFAULT_ROUNDS: usize = 1;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub rounds_run: usize,
    /// Max over rounds of `‖V₁ − V₂R′‖∞ / max(1, ‖V₁‖∞)`.
    pub max_residual: f64,
    pub seed: u64,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Seed for round `i`: `mix64(seed ^ i)` (see [`crate::rng::derive_seed`]).
pub fn round_seed(seed: u64, round: usize) -> u64 {
    derive_seed(seed, round as u64)
}

/// Runs `rounds` independent checks; passes iff every round's relative
/// residual is at most `tol`. Records exactly `3mn` SM per round.
pub fn verify<T: Scalar>(
    x1: &Matrix<T>,
    x2: &Matrix<T>,
    r_prime: &Matrix<T>,
    rounds: usize,
    tol: f64,
    seed: u64,
    meter: &mut CostMeter,
) -> Result<VerificationReport> {
    let (m, n) = x1.shape();
    if x2.shape() != (n, m) || r_prime.shape() != (n, m) {
        return Err(Error::shape(
            "verify",
            format!("x1 {:?}, x2 {:?}, R' {:?}; expected m x n, n x m, n x m", x1.shape(), x2.shape(), r_prime.shape()),
        ));
    }
    if rounds == 0 {
        return Err(Error::param("verification needs at least one round"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("verification tolerance must be positive"));
    }

    let mut max_residual = 0.0f64;
    for round in 0..rounds {
        let r = random_matrix(round_seed(seed, round), 1, n, -T::one(), T::one())?;
        let v1 = mat_mul(&r, x2, meter)?;
        let v2 = mat_mul(&v1, x1, meter)?;
        let v2r = mat_mul(&v2, r_prime, meter)?;
        let diff = v1
            .as_slice()
            .iter()
            .zip(v2r.as_slice())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs().as_f64()));
        let residual = diff / v1.max_abs().as_f64().max(1.0);
        max_residual = max_residual.max(residual);
    }
    Ok(VerificationReport { passed: max_residual <= tol, rounds_run: rounds, max_residual, seed })
}
