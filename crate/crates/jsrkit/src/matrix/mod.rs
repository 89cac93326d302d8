//! Dense complex matrices at desk scale and the kernels built on them.

mod eigen;
mod hermitian;

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eigen::{eigenvalues, eigenvalues_qr};
pub(crate) use hermitian::null_space;
pub use hermitian::{hermitian_eigen, HermitianEigen};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex matrix. Square in almost every use, but corner
/// blocks of a triangularisation are rectangular so the shape is general.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        Matrix::from_parts(&r.re, r.im.as_deref())
    }
}

impl From<Matrix> for MatrixRepr {
    fn from(m: Matrix) -> Self {
        let re = (0..m.rows)
            .map(|i| (0..m.cols).map(|j| m[(i, j)].re).collect())
            .collect();
        let im = if m.is_real() {
            None
        } else {
            Some(
                (0..m.rows)
                    .map(|i| (0..m.cols).map(|j| m[(i, j)].im).collect())
                    .collect(),
            )
        };
        MatrixRepr { re, im }
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested rows of real parts and optional imaginary parts.
    pub fn from_parts(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<Self> {
        let rows = re.len();
        let cols = re.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("empty matrix".into()));
        }
        if re.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows in real part".into()));
        }
        if let Some(im) = im {
            if im.len() != rows || im.iter().any(|r| r.len() != cols) {
                return Err(Error::Dimension(
                    "imaginary part shape differs from real part".into(),
                ));
            }
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let b = im.map_or(0.0, |im| im[i][j]);
                data.push(C64::new(re[i][j], b));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Square real matrix from rows. Panics on ragged input; meant for literals.
    pub fn real(rows: &[&[f64]]) -> Self {
        let owned: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Self::from_parts(&owned, None).expect("well-formed real literal")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::real(&[&[c, -s], &[s, c]])
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

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &z) in c.iter().enumerate() {
                m[(i, j)] = z;
            }
        }
        m
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let r = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let o = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in o.iter_mut().zip(r) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Real matrix-vector product; imaginary parts are ignored.
    pub fn apply_real(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a.re * b).sum())
            .collect()
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, c: C64) -> Matrix {
        let data = self.data.iter().map(|z| z * c).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale_real(&self, c: f64) -> Matrix {
        let data = self.data.iter().map(|z| z * c).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn adjoint(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rectangular sub-block `[r0, r1) x [c0, c1)`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        let mut out = Matrix::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out[(i - r0, j - c0)] = self[(i, j)];
            }
        }
        out
    }

    /// max_{i,j} |a_ij|
    pub fn max_entry_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute row sum, the norm induced by the sup norm on vectors.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        if self.rows == 2 && self.cols == 2 {
            return op_norm_2x2(&self.data);
        }
        if self.rows == 1 || self.cols == 1 {
            return self.frobenius();
        }
        let gram = self.adjoint().mul(self);
        let top = hermitian_eigen(&gram).values[0];
        top.max(0.0).sqrt()
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let gram = self.adjoint().mul(self);
        hermitian_eigen(&gram)
            .values
            .into_iter()
            .map(|v| v.max(0.0).sqrt())
            .collect()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(eigenvalues(self)?
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    pub fn power(&self, n: u32) -> Matrix {
        let mut acc = Matrix::identity(self.rows);
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Action on the second exterior power, basis e_i ^ e_j with i < j in
    /// lexicographic order.
    pub fn exterior_square(&self) -> Result<Matrix> {
        if !self.is_square() || self.rows < 2 {
            return Err(Error::Dimension(
                "exterior square needs a square matrix of size at least 2".into(),
            ));
        }
        let pairs = index_pairs(self.rows);
        let n = pairs.len();
        let mut out = Matrix::zeros(n, n);
        for (r, &(i, j)) in pairs.iter().enumerate() {
            for (c, &(k, l)) in pairs.iter().enumerate() {
                out[(r, c)] = self[(i, k)] * self[(j, l)] - self[(i, l)] * self[(j, k)];
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn index_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            v.push((i, j));
        }
    }
    v
}

fn op_norm_2x2(a: &[C64]) -> f64 {
    let f2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let det = (a[0] * a[3] - a[1] * a[2]).norm();
    let disc = (f2 * f2 - 4.0 * det * det).max(0.0).sqrt();
    ((f2 + disc) / 2.0).sqrt()
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                let z = self[(i, j)];
                if z.im == 0.0 {
                    write!(f, "{}", z.re)?;
                } else {
                    write!(f, "{}{:+}i", z.re, z.im)?;
                }
            }
        }
        write!(f, "]")
    }
}

/// The finite family A_1..A_l, all square of a common size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSet {
    matrices: Vec<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl MatrixSet {
    pub fn new(matrices: Vec<Matrix>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::Dimension(
                "a matrix set needs at least one member".into(),
            ));
        };
        let d = first.rows;
        for (i, m) in matrices.iter().enumerate() {
            if !m.is_square() || m.rows != d {
                return Err(Error::Dimension(format!(
                    "member {} is {}x{}, expected {d}x{d}",
                    i + 1,
                    m.rows,
                    m.cols
                )));
            }
        }
        Ok(Self {
            matrices,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.matrices.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: self.matrices.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].rows
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// 1-based access, matching symbol conventions.
    pub fn get(&self, symbol: usize) -> Result<&Matrix> {
        if symbol == 0 || symbol > self.matrices.len() {
            return Err(Error::IndexOutOfRange {
                symbol,
                alphabet: self.matrices.len(),
            });
        }
        Ok(&self.matrices[symbol - 1])
    }

    pub fn is_real(&self) -> bool {
        self.matrices.iter().all(Matrix::is_real)
    }

    pub fn scaled(&self, c: f64) -> MatrixSet {
        MatrixSet {
            matrices: self.matrices.iter().map(|m| m.scale_real(c)).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> Result<MatrixSet> {
        MatrixSet::new(self.matrices.iter().map(f).collect())
    }

    pub fn exterior_square(&self) -> Result<MatrixSet> {
        let ms = self
            .matrices
            .iter()
            .map(Matrix::exterior_square)
            .collect::<Result<Vec<_>>>()?;
        MatrixSet::new(ms)
    }

    pub fn max_operator_norm(&self) -> f64 {
        self.matrices
            .iter()
            .map(Matrix::operator_norm)
            .fold(0.0, f64::max)
    }
}
