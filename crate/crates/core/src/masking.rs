//! Client-side blinding: secret key generation, input masking and output
//! recovery.
//!
//! The secret key is two sequences of elementary operations, `P₁..P_k` and
//! `Q₁..Q_k`. The client publishes
//!
//! ```text
//! X₁ = X · P₁ · P₂ ⋯ P_k        (column operations, P₁ applied first)
//! X₂ = Q_k ⋯ Q₂ · Q₁ · Xᵀ       (row operations, Q₁ applied first)
//! ```
//!
//! and later unmasks the worker's `R′` with `R = P₁ · P₂ ⋯ P_k · R′`
//! (row operations, `P_k` applied first). Because `P` and `Q` are products of
//! invertible matrices, `R = (XᵀX)⁻¹Xᵀ`.
//!
//! Operations are applied directly to rows or columns; no elementary matrix
//! is ever materialized outside of tests and [`ElementaryOp::explicit_matrix`].
//! All indices are zero-based.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mat_vec, transpose, Matrix, Vector};
use crate::meter::CostMeter;
use crate::rng::{rng_from_seed, SeededRng};
use crate::scalar::Scalar;

/// Smallest number of operations per side.
pub const MIN_OPS: usize = 4;
/// Operations per side when the caller does not choose.
pub const DEFAULT_OPS: usize = 8;
/// Magnitude range of generated key scalars; the sign is drawn separately.
pub const KEY_SCALAR_RANGE: (f64, f64) = (0.5, 2.0);

/// One elementary transformation, described by its `n × n` matrix `E`.
///
/// Right-multiplication `X · E` acts on columns, left-multiplication `E · X`
/// on rows; see [`apply_column_op`] and [`apply_row_op`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", bound(deserialize = "T: Scalar", serialize = "T: Scalar"))]
pub enum ElementaryOp<T> {
    /// `E = diag(factors)`.
    ScaleAll { factors: Vec<T> },
    /// `E[i][perm[i]] = 1`, zero elsewhere.
    Permute { perm: Vec<usize> },
    /// Identity plus the single off-diagonal entry `E[src][dst] = scalar`.
    /// As a column operation this adds `scalar × column src` to column `dst`.
    AddMultiple { src: usize, dst: usize, scalar: T },
}

impl<T: Scalar> ElementaryOp<T> {
    /// Checks the operation is a valid invertible elementary matrix of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ElementaryOp::ScaleAll { factors } => {
                if factors.len() != n {
                    return Err(Error::shape("ScaleAll", format!("{} factors for dimension {n}", factors.len())));
                }
                if let Some(i) = factors.iter().position(|f| *f == T::zero() || !f.is_finite()) {
                    return Err(Error::param(format!("ScaleAll factor {i} must be finite and non-zero")));
                }
            }
            ElementaryOp::Permute { perm } => {
                if perm.len() != n {
                    return Err(Error::shape("Permute", format!("permutation of {} for dimension {n}", perm.len())));
                }
                let mut seen = vec![false; n];
                for &p in perm {
                    if p >= n || std::mem::replace(&mut seen[p], true) {
                        return Err(Error::param("Permute must be a bijection on 0..n"));
                    }
                }
            }
            ElementaryOp::AddMultiple { src, dst, scalar } => {
                if *src >= n || *dst >= n {
                    return Err(Error::shape("AddMultiple", format!("index ({src},{dst}) out of range for {n}")));
                }
                if src == dst {
                    return Err(Error::param("AddMultiple needs src != dst"));
                }
                if *scalar == T::zero() || !scalar.is_finite() {
                    return Err(Error::param("AddMultiple scalar must be finite and non-zero"));
                }
            }
        }
        Ok(())
    }

    /// The `n × n` matrix this operation stands for.
    pub fn explicit_matrix(&self, n: usize) -> Result<Matrix<T>> {
        self.validate(n)?;
        let mut data = vec![T::zero(); n * n];
        match self {
            ElementaryOp::ScaleAll { factors } => {
                for (i, &f) in factors.iter().enumerate() {
                    data[i * n + i] = f;
                }
            }
            ElementaryOp::Permute { perm } => {
                for (i, &p) in perm.iter().enumerate() {
                    data[i * n + p] = T::one();
                }
            }
            ElementaryOp::AddMultiple { src, dst, scalar } => {
                for i in 0..n {
                    data[i * n + i] = T::one();
                }
                data[src * n + dst] = *scalar;
            }
        }
        Matrix::new(n, n, data)
    }

    pub fn kind(&self) -> OpKind {
        match self {
            ElementaryOp::ScaleAll { .. } => OpKind::ScaleAll,
            ElementaryOp::Permute { .. } => OpKind::Permute,
            ElementaryOp::AddMultiple { .. } => OpKind::AddMultiple,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    ScaleAll,
    Permute,
    AddMultiple,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::ScaleAll, OpKind::Permute, OpKind::AddMultiple];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::ScaleAll => "ScaleAll",
            OpKind::Permute => "Permute",
            OpKind::AddMultiple => "AddMultiple",
        }
    }
}

/// `x · E`.
///
/// Costs: ScaleAll `rows·cols` SM; Permute `rows·cols` AS; AddMultiple `rows` SM.
pub fn apply_column_op<T: Scalar>(mut x: Matrix<T>, op: &ElementaryOp<T>, meter: &mut CostMeter) -> Result<Matrix<T>> {
    op.validate(x.cols())?;
    let (rows, cols) = x.shape();
    match op {
        ElementaryOp::ScaleAll { factors } => {
            for row in x.data_mut().chunks_exact_mut(cols) {
                for (v, &f) in row.iter_mut().zip(factors) {
                    *v *= f;
                }
            }
            meter.add_sm((rows * cols) as u64);
            Ok(x)
        }
        ElementaryOp::Permute { perm } => {
            let mut out = vec![T::zero(); rows * cols];
            for (src_row, dst_row) in x.as_slice().chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
                for (i, &p) in perm.iter().enumerate() {
                    dst_row[p] = src_row[i];
                }
            }
            meter.add_as((rows * cols) as u64);
            Ok(Matrix::from_parts_unchecked(rows, cols, out))
        }
        ElementaryOp::AddMultiple { src, dst, scalar } => {
            for row in x.data_mut().chunks_exact_mut(cols) {
                let add = *scalar * row[*src];
                row[*dst] += add;
            }
            meter.add_sm(rows as u64);
            Ok(x)
        }
    }
}

/// `E · x`.
///
/// For the same operation value this touches rows where [`apply_column_op`]
/// touches columns: Permute fills row `i` from row `perm[i]`, and AddMultiple
/// adds `scalar × row dst` to row `src`.
///
/// Costs: ScaleAll `rows·cols` SM; Permute `rows·cols` AS; AddMultiple `cols` SM.
pub fn apply_row_op<T: Scalar>(mut x: Matrix<T>, op: &ElementaryOp<T>, meter: &mut CostMeter) -> Result<Matrix<T>> {
    op.validate(x.rows())?;
    let (rows, cols) = x.shape();
    match op {
        ElementaryOp::ScaleAll { factors } => {
            for (row, &f) in x.data_mut().chunks_exact_mut(cols).zip(factors) {
                for v in row {
                    *v *= f;
                }
            }
            meter.add_sm((rows * cols) as u64);
            Ok(x)
        }
        ElementaryOp::Permute { perm } => {
            let mut out = Vec::with_capacity(rows * cols);
            for &p in perm {
                out.extend_from_slice(x.row(p));
            }
            meter.add_as((rows * cols) as u64);
            Ok(Matrix::from_parts_unchecked(rows, cols, out))
        }
        ElementaryOp::AddMultiple { src, dst, scalar } => {
            let data = x.data_mut();
            let (target, source) = if src < dst {
                let (lo, hi) = data.split_at_mut(dst * cols);
                (&mut lo[src * cols..(src + 1) * cols], &hi[..cols])
            } else {
                let (lo, hi) = data.split_at_mut(src * cols);
                (&mut hi[..cols], &lo[dst * cols..(dst + 1) * cols] as &[T])
            };
            for (t, &s) in target.iter_mut().zip(source) {
                *t += *scalar * s;
            }
            meter.add_sm(cols as u64);
            Ok(x)
        }
    }
}

/// The client's private masking key `(SK_P, SK_Q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKey<T>", bound(deserialize = "T: Scalar", serialize = "T: Scalar"))]
pub struct SecretKey<T> {
    n: usize,
    k: usize,
    p_ops: Vec<ElementaryOp<T>>,
    q_ops: Vec<ElementaryOp<T>>,
    /// Set only on keys built with [`SecretKey::insecure_from_ops`].
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    insecure: bool,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct RawKey<T> {
    n: usize,
    k: usize,
    p_ops: Vec<ElementaryOp<T>>,
    q_ops: Vec<ElementaryOp<T>>,
    #[serde(default)]
    insecure: bool,
}

impl<T: Scalar> TryFrom<RawKey<T>> for SecretKey<T> {
    type Error = Error;

    fn try_from(raw: RawKey<T>) -> Result<Self> {
        let key = if raw.insecure {
            SecretKey::insecure_from_ops(raw.n, raw.p_ops, raw.q_ops)?
        } else {
            SecretKey::from_ops(raw.n, raw.p_ops, raw.q_ops)?
        };
        if key.k != raw.k {
            return Err(Error::param(format!("key declares k={} but carries {} ops per side", raw.k, key.k)));
        }
        Ok(key)
    }
}

impl<T: Scalar> SecretKey<T> {
    /// Assembles a key, enforcing the production layout: `k ≥ 4` ops per
    /// side, ScaleAll first, Permute second, AddMultiple for the rest.
    pub fn from_ops(n: usize, p_ops: Vec<ElementaryOp<T>>, q_ops: Vec<ElementaryOp<T>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("key dimension must be at least 2, got {n}")));
        }
        if p_ops.len() != q_ops.len() {
            return Err(Error::param("P and Q sides must have the same number of ops"));
        }
        let k = p_ops.len();
        if k < MIN_OPS {
            return Err(Error::param(format!("need k >= {MIN_OPS} ops per side, got {k}")));
        }
        for ops in [&p_ops, &q_ops] {
            for (i, op) in ops.iter().enumerate() {
                op.validate(n)?;
                let expected = match i {
                    0 => OpKind::ScaleAll,
                    1 => OpKind::Permute,
                    _ => OpKind::AddMultiple,
                };
                if op.kind() != expected {
                    return Err(Error::param(format!("op {i} must be {}, found {}", expected.name(), op.kind().name())));
                }
            }
        }
        Ok(SecretKey { n, k, p_ops, q_ops, insecure: false })
    }

    /// Key with arbitrary op sequences (any layout, any length, identity ops
    /// allowed). Unsafe for privacy; meant for tests and worked examples.
    pub fn insecure_from_ops(n: usize, p_ops: Vec<ElementaryOp<T>>, q_ops: Vec<ElementaryOp<T>>) -> Result<Self> {
        for op in p_ops.iter().chain(&q_ops) {
            op.validate(n)?;
        }
        let k = p_ops.len().max(q_ops.len());
        Ok(SecretKey { n, k, p_ops, q_ops, insecure: true })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p_ops(&self) -> &[ElementaryOp<T>] {
        &self.p_ops
    }

    pub fn q_ops(&self) -> &[ElementaryOp<T>] {
        &self.q_ops
    }

    pub fn is_insecure(&self) -> bool {
        self.insecure
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("key serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn key_scalar<T: Scalar>(rng: &mut SeededRng) -> T {
    let (lo, hi) = KEY_SCALAR_RANGE;
    let mag: f64 = rng.gen_range(lo..=hi);
    let v = if rng.gen::<bool>() { mag } else { -mag };
    T::lit(v)
}

fn random_side<T: Scalar>(n: usize, k: usize, rng: &mut SeededRng) -> Vec<ElementaryOp<T>> {
    let mut ops = Vec::with_capacity(k);
    ops.push(ElementaryOp::ScaleAll { factors: (0..n).map(|_| key_scalar(rng)).collect() });
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    ops.push(ElementaryOp::Permute { perm });
    for _ in 2..k {
        let src = rng.gen_range(0..n);
        let mut dst = rng.gen_range(0..n - 1);
        if dst >= src {
            dst += 1;
        }
        ops.push(ElementaryOp::AddMultiple { src, dst, scalar: key_scalar(rng) });
    }
    ops
}

/// Draws a fresh key for `n`-column inputs with `k` ops per side.
///
/// All randomness comes from `seed`; the P side is drawn before the Q side.
/// Key scalars have magnitude uniform in [`KEY_SCALAR_RANGE`] and a random
/// sign. AddMultiple index pairs may repeat across ops.
pub fn keygen<T: Scalar>(n: usize, k: usize, seed: u64) -> Result<SecretKey<T>> {
    if k < MIN_OPS {
        return Err(Error::param(format!("need k >= {MIN_OPS} ops per side, got {k}")));
    }
    if n < 2 {
        return Err(Error::param(format!("key dimension must be at least 2, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let p_ops = random_side(n, k, &mut rng);
    let q_ops = random_side(n, k, &mut rng);
    SecretKey::from_ops(n, p_ops, q_ops)
}

/// The public masked pair `(X₁, X₂)` with `X₁: m × n`, `X₂: n × m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem<T>", bound(deserialize = "T: Scalar", serialize = "T: Scalar"))]
pub struct MaskedProblem<T> {
    x1: Matrix<T>,
    x2: Matrix<T>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct RawProblem<T> {
    x1: Matrix<T>,
    x2: Matrix<T>,
}

impl<T: Scalar> TryFrom<RawProblem<T>> for MaskedProblem<T> {
    type Error = Error;

    fn try_from(raw: RawProblem<T>) -> Result<Self> {
        MaskedProblem::new(raw.x1, raw.x2)
    }
}

impl<T: Scalar> MaskedProblem<T> {
    pub fn new(x1: Matrix<T>, x2: Matrix<T>) -> Result<Self> {
        if x1.rows() != x2.cols() || x1.cols() != x2.rows() {
            return Err(Error::shape(
                "MaskedProblem",
                format!("x1 is {:?} but x2 is {:?}; expected m x n and n x m", x1.shape(), x2.shape()),
            ));
        }
        Ok(MaskedProblem { x1, x2 })
    }

    pub fn x1(&self) -> &Matrix<T> {
        &self.x1
    }

    pub fn x2(&self) -> &Matrix<T> {
        &self.x2
    }

    /// Sample count `m`.
    pub fn m(&self) -> usize {
        self.x1.rows()
    }

    /// Feature count `n`.
    pub fn n(&self) -> usize {
        self.x1.cols()
    }
}

/// Masks `x` (m × n) into `(X₁, X₂)`.
///
/// Rank deficiency is not detected here; it surfaces as a singular-matrix
/// error when the worker inverts `X₂X₁`.
pub fn probgen<T: Scalar>(x: &Matrix<T>, sk: &SecretKey<T>, meter: &mut CostMeter) -> Result<MaskedProblem<T>> {
    if x.cols() != sk.n {
        return Err(Error::shape("probgen", format!("input has {} columns, key is for {}", x.cols(), sk.n)));
    }
    let mut x1 = x.clone();
    for op in &sk.p_ops {
        x1 = apply_column_op(x1, op, meter)?;
    }
    let mut x2 = transpose(x);
    for op in &sk.q_ops {
        x2 = apply_row_op(x2, op, meter)?;
    }
    MaskedProblem::new(x1, x2)
}

fn unmask_rows<T: Scalar>(sk: &SecretKey<T>, mut r: Matrix<T>, meter: &mut CostMeter) -> Result<Matrix<T>> {
    for op in sk.p_ops.iter().rev() {
        r = apply_row_op(r, op, meter)?;
    }
    Ok(r)
}

fn check_recover_shapes<T: Scalar>(sk: &SecretKey<T>, r_prime: &Matrix<T>, y: &Vector<T>) -> Result<()> {
    if r_prime.rows() != sk.n || r_prime.cols() != y.len() {
        return Err(Error::shape(
            "recover",
            format!("R' is {:?}, expected {} x {} for key n={} and y of length {}", r_prime.shape(), sk.n, y.len(), sk.n, y.len()),
        ));
    }
    Ok(())
}

/// Unmasks the worker's result: `R = P₁ ⋯ P_k · R′`, then `ω = R · y`.
pub fn recover<T: Scalar>(
    sk: &SecretKey<T>,
    r_prime: &Matrix<T>,
    y: &Vector<T>,
    meter: &mut CostMeter,
) -> Result<(Matrix<T>, Vector<T>)> {
    check_recover_shapes(sk, r_prime, y)?;
    let r = unmask_rows(sk, r_prime.clone(), meter)?;
    let omega = mat_vec(&r, y, meter)?;
    Ok((r, omega))
}

/// Computes only `ω`, unmasking the length-`n` vector `R′y` instead of the
/// full `n × m` matrix. Matches [`recover`]'s `ω` up to rounding.
pub fn recover_fast<T: Scalar>(
    sk: &SecretKey<T>,
    r_prime: &Matrix<T>,
    y: &Vector<T>,
    meter: &mut CostMeter,
) -> Result<Vector<T>> {
    check_recover_shapes(sk, r_prime, y)?;
    let ry = mat_vec(r_prime, y, meter)?;
    let col = Matrix::from_parts_unchecked(ry.len(), 1, ry.as_slice().to_vec());
    let out = unmask_rows(sk, col, meter)?;
    Vector::new(out.into_vec())
}
