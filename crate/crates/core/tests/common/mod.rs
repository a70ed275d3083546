#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use vlr_core::{Matrix, Vector};

pub fn to_na(x: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice())
}

/// Normal-equations solution via nalgebra's Cholesky factorization of XᵀX,
/// independent of the crate's Gauss–Jordan path.
pub fn oracle_omega(x: &Matrix, y: &Vector) -> DVector<f64> {
    let xn = to_na(x);
    let yn = DVector::from_column_slice(y.as_slice());
    let gram = xn.transpose() * &xn;
    let rhs = xn.transpose() * yn;
    gram.cholesky().expect("XᵀX positive definite").solve(&rhs)
}

/// (XᵀX)⁻¹Xᵀ via nalgebra LU.
pub fn oracle_pinv(x: &Matrix) -> DMatrix<f64> {
    let xn = to_na(x);
    let gram = xn.transpose() * &xn;
    gram.lu().try_inverse().expect("XᵀX invertible") * xn.transpose()
}

pub fn rel_err(got: &[f64], want: &DVector<f64>) -> f64 {
    let num = got.iter().zip(want.iter()).fold(0.0f64, |a, (g, w)| a.max((g - w).abs()));
    num / want.amax().max(f64::MIN_POSITIVE)
}
