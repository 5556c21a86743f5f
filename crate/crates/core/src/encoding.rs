//! Dense complex matrices and the complex-to-real block embedding.
//!
//! Every complex entry `a + ib` is replaced by the 2x2 block `[[a, -b], [b, a]]`,
//! so a `n x n` complex matrix becomes a `2n x 2n` real matrix. The map is an
//! injective *-algebra homomorphism: products, adjoints and the identity carry
//! over, and unitaries become orthogonal matrices. The MIP formulation works
//! entirely in this real picture.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Tolerance used for unitarity checks.
pub const TOL_UNITARY: f64 = 1e-9;
/// Tolerance used when comparing algebraic identities.
pub const TOL_IDENTITY: f64 = 1e-8;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodingError {
    #[error("matrix is not square: {rows} rows, row {bad_row} has {cols} columns")]
    NotSquare { rows: usize, bad_row: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix dimension {0} is not a power of two")]
    NotQubitSized(usize),
    #[error("malformed real encoding at block ({row}, {col})")]
    MalformedEncoding { row: usize, col: usize },
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = self.get(i, j);
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from rows, rejecting ragged or non-finite input.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self, EncodingError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(EncodingError::NotSquare { rows: dim, bad_row: i, cols: row.len() });
            }
            data.extend(row);
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EncodingError::NonFinite);
        }
        Ok(Self { dim, data })
    }

    /// Convenience constructor from real row data.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, EncodingError> {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| c(x, 0.0)).collect()).collect())
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m.data[i * entries.len() + i] = z;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of qubits when the dimension is a power of two.
    pub fn num_qubits(&self) -> Result<usize, EncodingError> {
        if self.dim.is_power_of_two() {
            Ok(self.dim.trailing_zeros() as usize)
        } else {
            Err(EncodingError::NotQubitSized(self.dim))
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.data[i * self.dim + j] = z;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&a| a * z).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn try_matmul(&self, other: &Self) -> Result<Self, EncodingError> {
        if self.dim != other.dim {
            return Err(EncodingError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(self.matmul(other))
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |i, j| self.get(i / m, j / m) * other.get(i % m, j % m))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim && self.max_abs_diff(other) <= tol
    }

    /// Equality up to a global phase, decided through the phase-invariant fidelity.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim && fidelity_unchecked(self, other) >= 1.0 - tol
    }

    /// `max |A†A - 1|` over all entries.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Determinant by LU decomposition with partial pivoting.
    pub fn det(&self) -> C64 {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = c(1.0, 0.0);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .unwrap_or(col);
            if a[pivot * n + col].norm() == 0.0 {
                return c(0.0, 0.0);
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                if f.norm() == 0.0 {
                    continue;
                }
                for k in col..n {
                    let v = a[col * n + k];
                    a[r * n + k] -= f * v;
                }
            }
        }
        det
    }

    /// Orthonormalizes the columns of a (generic) matrix by modified Gram-Schmidt.
    ///
    /// Feeding a matrix of i.i.d. complex Gaussians yields a Haar-random unitary
    /// up to column phases, which is all the tests need.
    pub fn gram_schmidt(&self) -> Self {
        let n = self.dim;
        let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| self.get(i, j)).collect()).collect();
        for j in 0..n {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj: C64 = done[k].iter().zip(rest[0].iter()).map(|(u, v)| u.conj() * v).sum();
                for (v, u) in rest[0].iter_mut().zip(done[k].iter()) {
                    *v -= proj * u;
                }
            }
            let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for v in cols[j].iter_mut() {
                *v /= norm;
            }
        }
        Self::from_fn(n, |i, j| cols[j][i])
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

/// Square real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self, EncodingError> {
        if data.len() != dim * dim {
            return Err(EncodingError::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.dim + j] = x;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn det(&self) -> f64 {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs())).unwrap_or(col);
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                if f == 0.0 {
                    continue;
                }
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
            }
        }
        det
    }

    /// Checks the 2x2 block pattern `[[a, -b], [b, a]]` of a real encoding.
    pub fn block_structure_violation(&self, tol: f64) -> Option<(usize, usize)> {
        if self.dim % 2 != 0 {
            return Some((0, 0));
        }
        let n = self.dim / 2;
        for i in 0..n {
            for j in 0..n {
                let (r, s) = (2 * i, 2 * j);
                if (self.get(r + 1, s + 1) - self.get(r, s)).abs() > tol
                    || (self.get(r, s + 1) + self.get(r + 1, s)).abs() > tol
                {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// A real matrix known to carry the 2x2 block structure of an encoded complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealEncodedMatrix {
    inner: RealMatrix,
}

impl RealEncodedMatrix {
    /// Wraps a real matrix after validating its block structure within `tol`.
    pub fn try_from_real(m: RealMatrix, tol: f64) -> Result<Self, EncodingError> {
        match m.block_structure_violation(tol) {
            Some((row, col)) => Err(EncodingError::MalformedEncoding { row, col }),
            None => Ok(Self { inner: m }),
        }
    }

    pub fn as_real(&self) -> &RealMatrix {
        &self.inner
    }

    pub fn into_real(self) -> RealMatrix {
        self.inner
    }

    /// Dimension of the complex matrix this encodes.
    pub fn origin_dim(&self) -> usize {
        self.inner.dim / 2
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self { inner: self.inner.matmul(&other.inner) }
    }

    pub fn transpose(&self) -> Self {
        Self { inner: self.inner.transpose() }
    }
}

/// Unit-modulus phase `r + is` in rectangular form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalPhase {
    pub r: f64,
    pub s: f64,
}

impl GlobalPhase {
    pub fn from_angle(phi: f64) -> Self {
        Self { r: phi.cos(), s: phi.sin() }
    }

    pub fn modulus_sq(&self) -> f64 {
        self.r * self.r + self.s * self.s
    }

    pub fn as_complex(&self) -> C64 {
        c(self.r, self.s)
    }
}

/// The real 2x2 block of a complex scalar.
pub fn encode_scalar(z: C64) -> [[f64; 2]; 2] {
    [[z.re, -z.im], [z.im, z.re]]
}

pub fn encode_real(a: &ComplexMatrix) -> RealEncodedMatrix {
    let n = a.dim();
    let mut out = RealMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let blk = encode_scalar(a.get(i, j));
            for (u, row) in blk.iter().enumerate() {
                for (v, &x) in row.iter().enumerate() {
                    out.set(2 * i + u, 2 * j + v, x);
                }
            }
        }
    }
    RealEncodedMatrix { inner: out }
}

/// Inverse of [`encode_real`]; rejects matrices without the block structure.
pub fn decode_complex(b: &RealMatrix) -> Result<ComplexMatrix, EncodingError> {
    if b.dim() % 2 != 0 {
        return Err(EncodingError::NotQubitSized(b.dim()));
    }
    if let Some((row, col)) = b.block_structure_violation(TOL_UNITARY) {
        return Err(EncodingError::MalformedEncoding { row, col });
    }
    Ok(decode_unchecked(b))
}

pub(crate) fn decode_unchecked(b: &RealMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(b.dim() / 2, |i, j| c(b.get(2 * i, 2 * j), b.get(2 * i + 1, 2 * j)))
}

/// `J_n = 1_n ⊗ [[0, -1], [1, 0]]`, the encoding of `i·1_n`.
pub fn j_matrix(n: usize) -> RealMatrix {
    let mut m = RealMatrix::zeros(2 * n);
    for i in 0..n {
        m.set(2 * i, 2 * i + 1, -1.0);
        m.set(2 * i + 1, 2 * i, 1.0);
    }
    m
}

/// `(Re Tr A, Im Tr A)` read off the encoding as `½Tr(B)` and `-½Tr(J_n B)`.
pub fn trace_parts(b: &RealEncodedMatrix) -> (f64, f64) {
    let re = 0.5 * b.inner.trace();
    // Tr(J B) = sum_i (J B)_{ii}; only the off-diagonal J entries contribute.
    let mut tr_jb = 0.0;
    for i in 0..b.origin_dim() {
        tr_jb += -b.get(2 * i + 1, 2 * i) + b.get(2 * i, 2 * i + 1);
    }
    (re, -0.5 * tr_jb)
}

/// Phase-invariant fidelity `|Tr(T†U)|² / dim²`.
pub fn fidelity(u: &ComplexMatrix, t: &ComplexMatrix) -> Result<f64, EncodingError> {
    if u.dim() != t.dim() {
        return Err(EncodingError::DimensionMismatch { expected: t.dim(), found: u.dim() });
    }
    Ok(fidelity_unchecked(u, t))
}

pub(crate) fn fidelity_unchecked(u: &ComplexMatrix, t: &ComplexMatrix) -> f64 {
    let n = u.dim();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += t.get(i, j).conj() * u.get(i, j);
        }
    }
    let f = acc.norm_sqr() / (n * n) as f64;
    f.min(1.0)
}

/// Normalized complex overlap `Tr(T†U) / dim`.
pub fn overlap(u: &ComplexMatrix, t: &ComplexMatrix) -> C64 {
    let n = u.dim();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += t.get(i, j).conj() * u.get(i, j);
        }
    }
    acc / n as f64
}

/// Real and imaginary trace overlap `(α, β)` of an encoded cumulative product against a target.
pub fn alpha_beta(ghat: &RealMatrix, t: &ComplexMatrix) -> Result<(f64, f64), EncodingError> {
    if ghat.dim() != 2 * t.dim() {
        return Err(EncodingError::DimensionMismatch { expected: 2 * t.dim(), found: ghat.dim() });
    }
    let rt = encode_real(t);
    let n2 = ghat.dim();
    // Tr(R(T)^T G) = sum_ij R(T)_ij G_ij
    let mut tr = 0.0;
    for i in 0..n2 {
        for j in 0..n2 {
            tr += rt.get(i, j) * ghat.get(i, j);
        }
    }
    // Tr(J R(T)^T G) = sum_{i} sum_k J_ik (R(T)^T G)_ki
    let mut tr_j = 0.0;
    for i in 0..t.dim() {
        let (a, b) = (2 * i, 2 * i + 1);
        let col_dot = |row: usize, col: usize| -> f64 { (0..n2).map(|k| rt.get(k, row) * ghat.get(k, col)).sum() };
        // J[a][b] = -1, J[b][a] = 1
        tr_j += -col_dot(b, a) + col_dot(a, b);
    }
    let norm = n2 as f64;
    Ok((tr / norm, -tr_j / norm))
}

/// Rescales `U` by the principal `n`-th root of `det(U)^{-1}` so the result has unit determinant.
pub fn su_normalize(u: &ComplexMatrix) -> Result<ComplexMatrix, EncodingError> {
    let defect = u.unitarity_defect();
    if defect > TOL_UNITARY {
        return Err(EncodingError::NotUnitary(defect));
    }
    Ok(u.scale(su_phase(u)))
}

/// The scalar `λ` applied by [`su_normalize`].
pub fn su_phase(u: &ComplexMatrix) -> C64 {
    let inv = u.det().inv();
    // principal branch: arg in (-π, π], with -0.0 folded onto +0.0
    let arg = (inv.im + 0.0).atan2(inv.re);
    C64::from_polar(1.0, arg / u.dim() as f64)
}

/// Whether `det R(A) = |det A|²` holds within `1e-8` (relative for large values).
pub fn det_encoding_check(a: &ComplexMatrix) -> bool {
    let lhs = encode_real(a).inner.det();
    let rhs = a.det().norm_sqr();
    (lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0)
}
