//! Local (non-outsourced) least squares via the normal equations.

use crate::error::Result;
use crate::matrix::{inverse, mat_mul, mat_vec, transpose, Matrix, Vector};
use crate::meter::CostMeter;
use crate::scalar::Scalar;

/// `(XᵀX)⁻¹Xᵀ`, the same quantity the unmasked worker result equals.
pub fn pseudo_inverse<T: Scalar>(x: &Matrix<T>, meter: &mut CostMeter) -> Result<Matrix<T>> {
    let xt = transpose(x);
    let gram = mat_mul(&xt, x, meter)?;
    let gram_inv = inverse(&gram, meter)?;
    mat_mul(&gram_inv, &xt, meter)
}

/// `ω = (XᵀX)⁻¹Xᵀy`. Records [`crate::cost::local_solve_sm`] SM.
pub fn local_solve<T: Scalar>(x: &Matrix<T>, y: &Vector<T>, meter: &mut CostMeter) -> Result<Vector<T>> {
    let pinv = pseudo_inverse(x, meter)?;
    mat_vec(&pinv, y, meter)
}
