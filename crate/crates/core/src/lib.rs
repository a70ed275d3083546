//! Masked, publicly verifiable outsourcing of least-squares training.
//!
//! A client blinds its design matrix `X` with secret elementary row/column
//! operations ([`masking`]), an untrusted worker computes the masked
//! pseudo-inverse ([`worker`]), anyone can check the result without secrets
//! ([`verifier`]), and an escrow [`ledger`] pays whichever side the check
//! favors. The client then unmasks the result and obtains `ω = (XᵀX)⁻¹Xᵀy`.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the protocol layer uses throughout.

pub mod bench;
pub mod cost;
pub mod error;
pub mod ledger;
pub mod masking;
pub mod matrix;
pub mod meter;
pub mod regression;
pub mod rng;
pub mod scalar;
pub mod verifier;
pub mod worker;

pub use error::{Error, Result};
pub use meter::CostMeter;
pub use scalar::Scalar;

pub type Matrix = matrix::Matrix<f64>;
pub type Vector = matrix::Vector<f64>;
pub type ElementaryOp = masking::ElementaryOp<f64>;
pub type SecretKey = masking::SecretKey<f64>;
pub type MaskedProblem = masking::MaskedProblem<f64>;

pub type Matrix32 = matrix::Matrix<f32>;
pub type Vector32 = matrix::Vector<f32>;
pub type SecretKey32 = masking::SecretKey<f32>;
pub type MaskedProblem32 = masking::MaskedProblem<f32>;
