//! Dense row-major matrices and vectors with metered arithmetic.
//!
//! Every routine that performs scalar multiplications takes a
//! [`CostMeter`] and records exactly how many it executed. The counts are
//! part of each function's contract and are listed in its doc comment.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meter::CostMeter;
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

/// Dense `rows × cols` matrix stored row-major. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix<T>", bound(deserialize = "T: Scalar"))]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct RawMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> TryFrom<RawMatrix<T>> for Matrix<T> {
    type Error = Error;

    fn try_from(raw: RawMatrix<T>) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

/// Dense column vector. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound(deserialize = "T: Scalar", serialize = "T: Scalar"))]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> TryFrom<Vec<T>> for Vector<T> {
    type Error = Error;

    fn try_from(data: Vec<T>) -> Result<Self> {
        Vector::new(data)
    }
}

impl<T: Scalar> From<Vector<T>> for Vec<T> {
    fn from(v: Vector<T>) -> Vec<T> {
        v.data
    }
}

fn check_finite<T: Scalar>(data: &[T]) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape("Matrix::new", format!("empty dimensions {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::new",
                format!("{rows}x{cols} needs {} entries, got {}", rows * cols, data.len()),
            ));
        }
        check_finite(&data)?;
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != cols) {
            return Err(Error::shape("Matrix::from_rows", format!("row {bad} has a different length")));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Matrix::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Matrix::new(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Matrix::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        Ok(m)
    }

    pub fn diag(entries: &[T]) -> Result<Self> {
        let n = entries.len();
        let mut m = Matrix::zeros(n, n)?;
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = e;
        }
        check_finite(&m.data)?;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Copy with entry `(i, j)` replaced.
    pub fn with_entry(&self, i: usize, j: usize, value: T) -> Result<Self> {
        if i >= self.rows || j >= self.cols {
            return Err(Error::shape("with_entry", format!("({i},{j}) outside {}x{}", self.rows, self.cols)));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(i * self.cols + j));
        }
        let mut out = self.clone();
        out.data[i * self.cols + j] = value;
        Ok(out)
    }

    /// First `keep` rows.
    pub fn top_rows(&self, keep: usize) -> Result<Self> {
        if keep == 0 || keep > self.rows {
            return Err(Error::shape("top_rows", format!("cannot keep {keep} of {} rows", self.rows)));
        }
        Matrix::new(keep, self.cols, self.data[..keep * self.cols].to_vec())
    }

    /// Induced infinity norm: maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |acc, x| acc + x.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub(crate) fn from_parts_unchecked(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    /// Text encoding: `rows cols` on the first line, then one line per row.
    /// Floats use the shortest representation that parses back exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 20);
        let _ = writeln!(out, "{} {}", self.rows, self.cols);
        for i in 0..self.rows {
            write_floats(&mut out, self.row(i));
        }
        out
    }
}

fn write_floats<T: Scalar>(out: &mut String, xs: &[T]) {
    for (j, x) in xs.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x}");
    }
    out.push('\n');
}

fn parse_floats<T: Scalar>(line: &str, expect: usize, what: &str) -> Result<Vec<T>> {
    let vals = line
        .split_whitespace()
        .map(|tok| tok.parse::<T>().map_err(|_| Error::Parse(format!("bad number {tok:?} in {what}"))))
        .collect::<Result<Vec<T>>>()?;
    if vals.len() != expect {
        return Err(Error::Parse(format!("{what}: expected {expect} values, found {}", vals.len())));
    }
    Ok(vals)
}

fn parse_count(tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

impl<T: Scalar> FromStr for Matrix<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty matrix text".into()))?;
        let mut dims = header.split_whitespace();
        let rows = parse_count(dims.next(), "row count")?;
        let cols = parse_count(dims.next(), "column count")?;
        if dims.next().is_some() {
            return Err(Error::Parse("header must be `rows cols`".into()));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {i}")))?;
            data.extend(parse_floats::<T>(line, cols, &format!("row {i}"))?);
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after last row".into()));
        }
        Matrix::new(rows, cols, data)
    }
}

impl<T: Scalar> Vector<T> {
    pub fn new(data: Vec<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::shape("Vector::new", "empty vector"));
        }
        check_finite(&data)?;
        Ok(Vector { data })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Vector::new(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> T {
        self.data[i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn norm_inf(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub(crate) fn from_vec_unchecked(data: Vec<T>) -> Self {
        Vector { data }
    }

    /// Text encoding: the length, then all entries on one line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.data.len());
        write_floats(&mut out, &self.data);
        out
    }
}

impl<T: Scalar> FromStr for Vector<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty vector text".into()))?;
        let len = parse_count(Some(header.trim()), "vector length")?;
        let line = lines.next().ok_or_else(|| Error::Parse("missing vector entries".into()))?;
        let data = parse_floats::<T>(line, len, "vector")?;
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after vector".into()));
        }
        Vector::new(data)
    }
}

/// `a · b`. Records `a.rows · a.cols · b.cols` SM.
pub fn mat_mul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, meter: &mut CostMeter) -> Result<Matrix<T>> {
    if a.cols != b.rows {
        return Err(Error::shape("mat_mul", format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols)));
    }
    let (m, n, p) = (a.rows, a.cols, b.cols);
    let mut out = vec![T::zero(); m * p];
    for (a_row, out_row) in a.data.chunks_exact(n).zip(out.chunks_exact_mut(p)) {
        for (&aik, b_row) in a_row.iter().zip(b.data.chunks_exact(p)) {
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    meter.add_sm((m * n * p) as u64);
    Ok(Matrix::from_parts_unchecked(m, p, out))
}

/// `a · v`. Records `a.rows · a.cols` SM.
pub fn mat_vec<T: Scalar>(a: &Matrix<T>, v: &Vector<T>, meter: &mut CostMeter) -> Result<Vector<T>> {
    if a.cols != v.len() {
        return Err(Error::shape("mat_vec", format!("{}x{} times vector of {}", a.rows, a.cols, v.len())));
    }
    let out = a
        .data
        .chunks_exact(a.cols)
        .map(|row| row.iter().zip(&v.data).fold(T::zero(), |acc, (&x, &y)| acc + x * y))
        .collect();
    meter.add_sm((a.rows * a.cols) as u64);
    Ok(Vector::from_vec_unchecked(out))
}

pub fn transpose<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    let (m, n) = (a.rows, a.cols);
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data[i * n + j];
        }
    }
    Matrix::from_parts_unchecked(n, m, out)
}

/// Multiplications recorded by [`inverse`] for an `n × n` input:
/// `n + (3n³ − n²) / 2`.
///
/// Per pivot column `c`: one reciprocal, then the pivot row and each of the
/// other `n − 1` rows touch the `n − c − 1` remaining left-block entries and
/// all `n` entries of the right block.
pub fn inverse_sm(n: usize) -> u64 {
    let n = n as u64;
    n + (3 * n * n * n - n * n) / 2
}

/// Gauss–Jordan inversion with partial pivoting.
///
/// A pivot whose magnitude falls below `T::PIVOT_RTOL` times the largest
/// absolute entry of its original row is reported as [`Error::Singular`].
/// Records [`inverse_sm`]`(n)` SM.
pub fn inverse<T: Scalar>(a: &Matrix<T>, meter: &mut CostMeter) -> Result<Matrix<T>> {
    if a.rows != a.cols {
        return Err(Error::shape("inverse", format!("{}x{} is not square", a.rows, a.cols)));
    }
    let n = a.rows;
    let mut left = a.data.clone();
    let mut right = Matrix::<T>::identity(n)?.data;
    let mut scale: Vec<T> = a.data.chunks_exact(n).map(|r| r.iter().fold(T::zero(), |s, x| s.max(x.abs()))).collect();
    let rtol = T::lit(T::PIVOT_RTOL);
    let mut pivot_left = vec![T::zero(); n];
    let mut pivot_right = vec![T::zero(); n];

    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| left[i * n + c].abs().partial_cmp(&left[j * n + c].abs()).expect("finite"))
            .expect("non-empty range");
        if p != c {
            for j in 0..n {
                left.swap(p * n + j, c * n + j);
                right.swap(p * n + j, c * n + j);
            }
            scale.swap(p, c);
        }
        let pivot = left[c * n + c];
        if scale[c] == T::zero() || pivot.abs() < rtol * scale[c] {
            return Err(Error::Singular { column: c, pivot: pivot.as_f64(), scale: scale[c].as_f64() });
        }

        let recip = T::one() / pivot;
        left[c * n + c] = T::one();
        for x in &mut left[c * n + c + 1..(c + 1) * n] {
            *x *= recip;
        }
        for x in &mut right[c * n..(c + 1) * n] {
            *x *= recip;
        }
        pivot_left[c + 1..].copy_from_slice(&left[c * n + c + 1..(c + 1) * n]);
        pivot_right.copy_from_slice(&right[c * n..(c + 1) * n]);

        for r in (0..n).filter(|&r| r != c) {
            let f = left[r * n + c];
            left[r * n + c] = T::zero();
            for (x, &p) in left[r * n + c + 1..(r + 1) * n].iter_mut().zip(&pivot_left[c + 1..]) {
                *x -= f * p;
            }
            for (x, &p) in right[r * n..(r + 1) * n].iter_mut().zip(&pivot_right) {
                *x -= f * p;
            }
        }
    }
    meter.add_sm(inverse_sm(n));
    Matrix::new(n, n, right)
}

/// Numerical rank by Gaussian elimination with full row scan; a pivot below
/// `tol · max|a|` counts as zero.
pub fn rank<T: Scalar>(a: &Matrix<T>, tol: T) -> usize {
    let (m, n) = (a.rows, a.cols);
    let mut w = a.data.clone();
    let thresh = tol * a.max_abs();
    let mut rank = 0;
    for c in 0..n {
        if rank == m {
            break;
        }
        let p = (rank..m)
            .max_by(|&i, &j| w[i * n + c].abs().partial_cmp(&w[j * n + c].abs()).expect("finite"))
            .expect("non-empty range");
        if w[p * n + c].abs() <= thresh {
            continue;
        }
        for j in 0..n {
            w.swap(p * n + j, rank * n + j);
        }
        let pivot = w[rank * n + c];
        for r in rank + 1..m {
            let f = w[r * n + c] / pivot;
            for j in c..n {
                let v = w[rank * n + j];
                w[r * n + j] -= f * v;
            }
        }
        rank += 1;
    }
    rank
}

/// Matrix with i.i.d. entries uniform on `[low, high)`, reproducible from `seed`.
pub fn random_matrix<T: Scalar>(seed: u64, rows: usize, cols: usize, low: T, high: T) -> Result<Matrix<T>> {
    if !(low < high) {
        return Err(Error::param(format!("random_matrix needs low < high, got [{low}, {high})")));
    }
    let mut rng = rng_from_seed(seed);
    let (lo, hi) = (low.as_f64(), high.as_f64());
    let data = (0..rows * cols)
        .map(|_| loop {
            let v = T::lit(rng.gen_range(lo..hi));
            if v < high {
                break v;
            }
        })
        .collect();
    Matrix::new(rows, cols, data)
}

/// Vector with i.i.d. entries uniform on `[low, high)`.
pub fn random_vector<T: Scalar>(seed: u64, len: usize, low: T, high: T) -> Result<Vector<T>> {
    let m = random_matrix(seed, len, 1, low, high)?;
    Vector::new(m.data)
}

/// Largest entrywise absolute difference.
pub fn max_abs_diff<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.shape() != b.shape() {
        return Err(Error::shape("max_abs_diff", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(a.data.iter().zip(&b.data).fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs())))
}

pub fn max_abs_diff_vec<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::shape("max_abs_diff_vec", format!("{} vs {}", a.len(), b.len())));
    }
    Ok(a.data.iter().zip(&b.data).fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_times_a_is_a() {
        let a = random_matrix::<f64>(1, 3, 4, -1.0, 1.0).unwrap();
        let mut meter = CostMeter::new();
        let out = mat_mul(&Matrix::identity(3).unwrap(), &a, &mut meter).unwrap();
        assert_eq!(out, a);
        assert_eq!(meter.sm(), 3 * 3 * 4);
    }

    #[test]
    fn mat_mul_hand_example() {
        let mut meter = CostMeter::new();
        let out = mat_mul(&m(&[&[1.0, 2.0], &[3.0, 4.0]]), &m(&[&[5.0], &[6.0]]), &mut meter).unwrap();
        assert_eq!(out, m(&[&[17.0], &[39.0]]));
        assert_eq!(meter.sm(), 4);
    }

    #[test]
    fn row_vector_times_matrix_counts_n_times_m() {
        let (n, cols) = (5, 7);
        let r = random_matrix::<f64>(2, 1, n, -1.0, 1.0).unwrap();
        let x2 = random_matrix::<f64>(3, n, cols, -1.0, 1.0).unwrap();
        let mut meter = CostMeter::new();
        let v = mat_mul(&r, &x2, &mut meter).unwrap();
        assert_eq!(v.shape(), (1, cols));
        assert_eq!(meter.sm(), (n * cols) as u64);
    }

    #[test]
    fn mat_mul_shape_error() {
        let a = Matrix::<f64>::zeros(2, 3).unwrap();
        let err = mat_mul(&a, &a, &mut CostMeter::new()).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn transpose_examples() {
        let i = Matrix::<f64>::identity(4).unwrap();
        assert_eq!(transpose(&i), i);
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(transpose(&a), m(&[&[1.0, 4.0], &[2.0, 5.0], &[3.0, 6.0]]));
        assert_eq!(transpose(&transpose(&a)), a);
    }

    #[test]
    fn inverse_examples() {
        let mut meter = CostMeter::new();
        let i4 = Matrix::<f64>::identity(4).unwrap();
        assert_eq!(inverse(&i4, &mut meter).unwrap(), i4);

        let d = Matrix::diag(&[2.0, 4.0]).unwrap();
        assert_eq!(inverse(&d, &mut meter).unwrap(), Matrix::diag(&[0.5, 0.25]).unwrap());

        // adjugate: inv([[a,b],[c,d]]) = [[d,-b],[-c,a]] / (ad - bc)
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let det = 2.0 * 2.0 - 1.0 * 1.0;
        let adj = m(&[&[2.0 / det, -1.0 / det], &[-1.0 / det, 2.0 / det]]);
        let inv = inverse(&a, &mut meter).unwrap();
        assert!(max_abs_diff(&inv, &adj).unwrap() < 1e-15);
    }

    #[test]
    fn inverse_counts_documented_formula() {
        for n in 1..8 {
            let a = random_matrix::<f64>(n as u64, n, n, 1.0, 2.0).unwrap();
            let a = mat_add_diag(&a, n as f64);
            let mut meter = CostMeter::new();
            inverse(&a, &mut meter).unwrap();
            assert_eq!(meter.sm(), inverse_sm(n));
            // brute-force tally of the loop structure
            let brute: u64 = (0..n).map(|c| 1 + (n as u64) * (2 * n - c - 1) as u64).sum();
            assert_eq!(inverse_sm(n), brute);
        }
    }

    fn mat_add_diag(a: &Matrix<f64>, d: f64) -> Matrix<f64> {
        let mut out = a.clone();
        let n = a.rows();
        for i in 0..n {
            out.data_mut()[i * n + i] += d;
        }
        out
    }

    #[test]
    fn singular_inputs_are_rejected() {
        let dup = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(inverse(&dup, &mut CostMeter::new()), Err(Error::Singular { .. })));
        let zero_row = m(&[&[1.0, 2.0], &[0.0, 0.0]]);
        assert!(matches!(inverse(&zero_row, &mut CostMeter::new()), Err(Error::Singular { .. })));
        let rect = Matrix::<f64>::zeros(2, 3).unwrap();
        assert!(matches!(inverse(&rect, &mut CostMeter::new()), Err(Error::Shape { .. })));
    }

    #[test]
    fn inverse_needs_pivoting() {
        let a = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let inv = inverse(&a, &mut CostMeter::new()).unwrap();
        assert_eq!(inv, a);
    }

    #[test]
    fn mat_vec_examples() {
        let mut meter = CostMeter::new();
        let v = Vector::new(vec![4.0, 5.0]).unwrap();
        let i = Matrix::<f64>::identity(2).unwrap();
        assert_eq!(mat_vec(&i, &v, &mut meter).unwrap(), v);
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_eq!(mat_vec(&a, &v, &mut meter).unwrap().as_slice(), &[13.0, 14.0]);
        let z = Matrix::<f64>::zeros(3, 2).unwrap();
        assert_eq!(mat_vec(&z, &v, &mut meter).unwrap(), Vector::zeros(3).unwrap());
        assert_eq!(meter.sm(), 4 + 4 + 6);
        assert!(mat_vec(&z, &Vector::zeros(3).unwrap(), &mut meter).is_err());
    }

    #[test]
    fn random_matrix_is_seeded_and_in_range() {
        let a = random_matrix::<f64>(7, 2, 2, 0.0, 1.0).unwrap();
        let b = random_matrix::<f64>(7, 2, 2, 0.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|&x| (0.0..1.0).contains(&x)));
        let c = random_matrix::<f64>(8, 2, 2, 0.0, 1.0).unwrap();
        assert_ne!(a, c);
        assert!(random_matrix::<f64>(7, 2, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn max_abs_diff_examples() {
        let a = random_matrix::<f64>(3, 3, 3, -1.0, 1.0).unwrap();
        assert_eq!(max_abs_diff(&a, &a).unwrap(), 0.0);
        let i2 = Matrix::<f64>::identity(2).unwrap();
        assert_eq!(max_abs_diff(&i2, &Matrix::zeros(2, 2).unwrap()).unwrap(), 1.0);
        assert_eq!(max_abs_diff(&m(&[&[1.0, 2.0]]), &m(&[&[1.0, 2.5]])).unwrap(), 0.5);
        assert!(max_abs_diff(&i2, &a).is_err());
    }

    #[test]
    fn construction_rejects_bad_data() {
        assert!(Matrix::new(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert_eq!(Matrix::new(1, 2, vec![1.0, f64::NAN]), Err(Error::NonFinite(1)));
        assert!(Matrix::<f64>::new(0, 2, vec![]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn text_format_round_trips_exactly() {
        let a = random_matrix::<f64>(11, 3, 4, -1e3, 1e3).unwrap();
        let text = a.to_text();
        assert!(text.starts_with("3 4\n"));
        assert_eq!(text.parse::<Matrix<f64>>().unwrap(), a);
        let v = random_vector::<f64>(12, 5, -1.0, 1.0).unwrap();
        assert_eq!(v.to_text().parse::<Vector<f64>>().unwrap(), v);
        assert!("2 2\n1 2\n3\n".parse::<Matrix<f64>>().is_err());
        assert!("1 1\nnan\n".parse::<Matrix<f64>>().is_err());
    }

    #[test]
    fn json_rejects_inconsistent_matrix() {
        let bad = r#"{"rows":2,"cols":2,"data":[1.0,2.0]}"#;
        assert!(serde_json::from_str::<Matrix<f64>>(bad).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let a = Matrix::<f32>::from_rows(&[[2.0f32, 1.0], [1.0, 2.0]]).unwrap();
        let inv = inverse(&a, &mut CostMeter::new()).unwrap();
        let prod = mat_mul(&a, &inv, &mut CostMeter::new()).unwrap();
        assert!(max_abs_diff(&prod, &Matrix::identity(2).unwrap()).unwrap() < 1e-6);
    }

    #[test]
    fn rank_detects_duplicates() {
        let a = m(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 1.0], &[3.0, 3.0, 5.0]]);
        assert_eq!(rank(&a, 1e-9), 2);
        assert_eq!(rank(&Matrix::<f64>::identity(5).unwrap(), 1e-9), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn inverse_of_diagonally_dominant(seed in any::<u64>(), n in 1usize..24) {
            let a = mat_add_diag(&random_matrix::<f64>(seed, n, n, 1.0, 2.0).unwrap(), n as f64);
            let inv = inverse(&a, &mut CostMeter::new()).unwrap();
            let prod = mat_mul(&a, &inv, &mut CostMeter::new()).unwrap();
            let err = max_abs_diff(&prod, &Matrix::identity(n).unwrap()).unwrap();
            prop_assert!(err <= 1e-9 * a.norm_inf().max(1.0));
        }

        #[test]
        fn product_transpose_identity(seed in any::<u64>()) {
            let a = random_matrix::<f64>(seed, 8, 8, -1.0, 1.0).unwrap();
            let b = random_matrix::<f64>(seed ^ 1, 8, 8, -1.0, 1.0).unwrap();
            let mut meter = CostMeter::new();
            let lhs = transpose(&mat_mul(&a, &b, &mut meter).unwrap());
            let rhs = mat_mul(&transpose(&b), &transpose(&a), &mut meter).unwrap();
            prop_assert!(max_abs_diff(&lhs, &rhs).unwrap() <= 1e-12);
        }

        #[test]
        fn mat_mul_meter_is_exact(m in 1usize..9, n in 1usize..9, p in 1usize..9, before in 0u64..1000) {
            let a = Matrix::<f64>::zeros(m, n).unwrap();
            let b = Matrix::<f64>::zeros(n, p).unwrap();
            let mut meter = CostMeter::new();
            meter.add_sm(before);
            mat_mul(&a, &b, &mut meter).unwrap();
            prop_assert_eq!(meter.sm(), before + (m * n * p) as u64);
        }
    }
}
