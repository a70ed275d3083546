//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Pivot magnitude, relative to the pivot row's scale, below which
    /// elimination declares a matrix singular.
    const PIVOT_RTOL: f64;

    /// Lossy conversion from `f64`; the constants used here are always representable.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float to f64")
    }
}

impl Scalar for f64 {
    const PIVOT_RTOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const PIVOT_RTOL: f64 = 1e-6;
}
