//! Dense complex linear algebra sized for qubit and qubit-pair problems.
//!
//! All matrices are small (at most 64 x 64 for eigendecompositions) and stored
//! row-major. The two-qubit basis order is fixed to `|00>, |01>, |10>, |11>`,
//! i.e. the first tensor factor (Alice) is the most significant index.

mod eig;
mod repr;
mod svd;

use std::fmt;
use std::ops::{Add, Mul, Sub};

pub use eig::{eig_hermitian, Eigen};
pub use num_complex::Complex64 as C64;
pub use svd::{svd, Svd};

use crate::error::{Error, Result};

/// Tolerance below which an asymmetric input is silently symmetrized.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Minimum eigenvalue accepted for a positive semidefinite object.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed gap between a declared and a computed trace.
pub const TRACE_TOL: f64 = 1e-10;

/// Which factor of a bipartite space an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Subsystem {
    A,
    B,
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            values.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// `|v><v|` for a column vector `v`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_c(C64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self * m * self^dagger`.
    pub fn conjugate(&self, m: &Self) -> Self {
        self.matmul(m).matmul(&self.adjoint())
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        Self::from_fn(r, c, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - self^dagger`.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Real part of `Tr(self^dagger other)`.
    pub fn inner_re(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Partial trace over one factor of a `dims.0 (x) dims.1` space.
    pub fn partial_trace(&self, dims: (usize, usize), side: Subsystem) -> Result<Self> {
        let (da, db) = dims;
        if !self.is_square() || da * db != self.rows {
            return Err(Error::Dimension(format!(
                "cannot factor a {}x{} matrix as {da}x{db}",
                self.rows, self.cols
            )));
        }
        Ok(match side {
            Subsystem::B => Self::from_fn(da, da, |i, j| {
                (0..db).map(|k| self[(i * db + k, j * db + k)]).sum()
            }),
            Subsystem::A => Self::from_fn(db, db, |i, j| {
                (0..da).map(|k| self[(k * db + i, k * db + j)]).sum()
            }),
        })
    }

    /// Partial transpose of one factor of a `dims.0 (x) dims.1` space.
    pub fn partial_transpose(&self, dims: (usize, usize), side: Subsystem) -> Result<Self> {
        let (da, db) = dims;
        if !self.is_square() || da * db != self.rows {
            return Err(Error::Dimension(format!(
                "cannot factor a {}x{} matrix as {da}x{db}",
                self.rows, self.cols
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols, |r, c| {
            let (i, k) = (r / db, r % db);
            let (j, l) = (c / db, c % db);
            match side {
                Subsystem::B => self[(i * db + l, j * db + k)],
                Subsystem::A => self[(j * db + k, i * db + l)],
            }
        }))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Kronecker product; the first argument is the more significant factor.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// A square matrix equal to its adjoint.
///
/// Inputs whose asymmetry is below [`HERMITICITY_TOL`] are replaced by
/// `(M + M^dagger) / 2`; larger asymmetry is rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let asym = m.max_asymmetry();
        if asym > HERMITICITY_TOL {
            return Err(Error::NotHermitian {
                max_asymmetry: asym,
            });
        }
        Ok(Self::symmetrized(&m))
    }

    /// Symmetrize without a tolerance check. Only for matrices that are
    /// Hermitian by construction (products like `A X A^dagger`).
    pub(crate) fn symmetrized(m: &ComplexMatrix) -> Self {
        let n = m.rows;
        Self(ComplexMatrix::from_fn(n, n, |i, j| {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        }))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn diag(values: &[f64]) -> Self {
        Self(ComplexMatrix::diag(values))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn eig(&self) -> Eigen {
        eig_hermitian(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().values[0]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }

    pub fn partial_trace(&self, dims: (usize, usize), side: Subsystem) -> Result<Self> {
        Ok(Self(self.0.partial_trace(dims, side)?))
    }

    pub fn partial_transpose(&self, dims: (usize, usize), side: Subsystem) -> Result<Self> {
        Ok(Self(self.0.partial_transpose(dims, side)?))
    }

    /// Eigenvalue clipping onto the positive semidefinite cone.
    pub fn psd_projection(&self) -> Self {
        let e = self.eig();
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in e.values.iter().enumerate() {
            if lam <= 0.0 {
                continue;
            }
            let v = e.vectors.column(k);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += v[i] * v[j].conj() * lam;
                }
            }
        }
        Self::symmetrized(&out)
    }
}

/// A positive semidefinite Hermitian matrix with an explicitly tracked trace.
///
/// Normalized states have trace 1; subnormalized objects (assemblage members,
/// hidden states) carry their own trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: HermitianMatrix,
    trace: f64,
}

impl DensityMatrix {
    pub fn new(matrix: HermitianMatrix) -> Result<Self> {
        let trace = matrix.trace();
        Self::with_trace(matrix, trace)
    }

    /// Construct and check the declared trace against the computed one.
    pub fn with_trace(matrix: HermitianMatrix, declared_trace: f64) -> Result<Self> {
        let computed = matrix.trace();
        if (computed - declared_trace).abs() > TRACE_TOL {
            return Err(Error::TraceMismatch {
                declared: declared_trace,
                computed,
            });
        }
        if computed < -TRACE_TOL {
            return Err(Error::NegativeTrace(computed));
        }
        let min_eig = matrix.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self {
            matrix,
            trace: computed,
        })
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(m)?)
    }

    /// Normalize a positive matrix to unit trace.
    pub fn normalized(matrix: HermitianMatrix) -> Result<Self> {
        let t = matrix.trace();
        if t <= 0.0 {
            return Err(Error::NegativeTrace(t));
        }
        Self::new(matrix.scale(1.0 / t))
    }

    pub fn pure(v: &[C64]) -> Result<Self> {
        Self::new(HermitianMatrix::symmetrized(&ComplexMatrix::outer(v)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.matrix.matrix()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.min_eigenvalue()
    }

    pub fn partial_trace(&self, dims: (usize, usize), side: Subsystem) -> Result<Self> {
        Self::new(self.matrix.partial_trace(dims, side)?)
    }

    /// Partial transpose; the result is Hermitian but need not be positive.
    pub fn partial_transpose(
        &self,
        dims: (usize, usize),
        side: Subsystem,
    ) -> Result<HermitianMatrix> {
        self.matrix.partial_transpose(dims, side)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Self::new(self.matrix.kron(&other.matrix))
    }
}

/// Partial trace of a bipartite density matrix.
pub fn partial_trace(
    rho: &DensityMatrix,
    dims: (usize, usize),
    side: Subsystem,
) -> Result<DensityMatrix> {
    rho.partial_trace(dims, side)
}

/// Partial transpose of a bipartite density matrix.
pub fn partial_transpose(
    rho: &DensityMatrix,
    dims: (usize, usize),
    side: Subsystem,
) -> Result<HermitianMatrix> {
    rho.partial_transpose(dims, side)
}

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub(crate) fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Pauli matrices `[X, Y, Z]`.
pub fn paulis() -> [ComplexMatrix; 3] {
    let z = r(0.0);
    [
        ComplexMatrix::new(2, 2, vec![z, r(1.0), r(1.0), z]).unwrap(),
        ComplexMatrix::new(2, 2, vec![z, c(0.0, -1.0), c(0.0, 1.0), z]).unwrap(),
        ComplexMatrix::new(2, 2, vec![r(1.0), z, z, r(-1.0)]).unwrap(),
    ]
}

/// `(weight / 2) (I + n . sigma)` for a Bloch vector `n`.
pub fn bloch_operator(weight: f64, n: [f64; 3]) -> HermitianMatrix {
    let h = 0.5 * weight;
    HermitianMatrix(
        ComplexMatrix::new(
            2,
            2,
            vec![
                r(h * (1.0 + n[2])),
                c(h * n[0], -h * n[1]),
                c(h * n[0], h * n[1]),
                r(h * (1.0 - n[2])),
            ],
        )
        .unwrap(),
    )
}

/// Inverse of [`bloch_operator`]: returns `(weight, n)`.
pub fn bloch_decompose(m: &HermitianMatrix) -> (f64, [f64; 3]) {
    let a = m.matrix();
    let w = (a[(0, 0)] + a[(1, 1)]).re;
    if w.abs() < 1e-300 {
        return (w, [0.0; 3]);
    }
    let x = 2.0 * a[(1, 0)].re / w;
    let y = 2.0 * a[(1, 0)].im / w;
    let z = (a[(0, 0)] - a[(1, 1)]).re / w;
    (w, [x, y, z])
}
