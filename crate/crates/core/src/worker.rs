//! The untrusted cloud worker.
//!
//! The worker only ever sees a [`MaskedProblem`]; nothing in this module can
//! reach a secret key.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::MaskedProblem;
use crate::matrix::{inverse, mat_mul, random_matrix, Matrix};
use crate::meter::CostMeter;
use crate::scalar::Scalar;

/// Default perturbation for [`CloudBehavior::PerturbOne`].
pub const DEFAULT_PERTURBATION: f64 = 1e-3;

/// How the worker answers. Everything except `Honest` is adversarial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CloudBehavior {
    Honest,
    /// Returns a seeded random `n × m` matrix with entries in `[-1, 1)`.
    RandomResult { seed: u64 },
    /// Honest result with `delta` added at `(row, col)`.
    PerturbOne { row: usize, col: usize, delta: f64 },
    /// Honest result with only its first `keep_rows` rows.
    Truncated { keep_rows: usize },
}

/// `R′ = (X₂X₁)⁻¹X₂`, an `n × m` matrix.
///
/// Records `2mn² + inverse_sm(n)` SM: `mn²` for `X₂X₁`, the Gauss–Jordan
/// count for the inverse, and `n²m` for the final product.
pub fn compute<T: Scalar>(mp: &MaskedProblem<T>, meter: &mut CostMeter) -> Result<Matrix<T>> {
    let gram = mat_mul(mp.x2(), mp.x1(), meter)?;
    let gram_inv = inverse(&gram, meter)?;
    mat_mul(&gram_inv, mp.x2(), meter)
}

pub fn compute_with_behavior<T: Scalar>(
    mp: &MaskedProblem<T>,
    behavior: CloudBehavior,
    meter: &mut CostMeter,
) -> Result<Matrix<T>> {
    let (n, m) = (mp.n(), mp.m());
    match behavior {
        CloudBehavior::Honest => compute(mp, meter),
        CloudBehavior::RandomResult { seed } => random_matrix(seed, n, m, -T::one(), T::one()),
        CloudBehavior::PerturbOne { row, col, delta } => {
            if delta == 0.0 || !delta.is_finite() {
                return Err(Error::param("PerturbOne delta must be finite and non-zero"));
            }
            if row >= n || col >= m {
                return Err(Error::param(format!("PerturbOne at ({row},{col}) outside {n}x{m} result")));
            }
            let honest = compute(mp, meter)?;
            let v = honest.get(row, col) + T::lit(delta);
            honest.with_entry(row, col, v)
        }
        CloudBehavior::Truncated { keep_rows } => {
            if keep_rows == 0 || keep_rows >= n {
                return Err(Error::param(format!("Truncated keep_rows must be in 1..{n}, got {keep_rows}")));
            }
            compute(mp, meter)?.top_rows(keep_rows)
        }
    }
}
