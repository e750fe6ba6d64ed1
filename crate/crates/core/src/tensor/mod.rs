//! Dense 4-way arrays and matrices.
//!
//! Layout convention: a [`Tensor4`] stores its values with the first index
//! varying fastest, so entry `(i, j, w, t)` lives at
//! `i + d1 * (j + d2 * (w + d3 * t))`. [`Matrix`] is row-major.
//!
//! Mode-k matricization puts mode k on the rows; the columns enumerate the
//! remaining modes in increasing mode order with the lowest mode varying
//! fastest.

mod io;
mod ops;

pub use io::{read_container, read_tensor_csv, write_container, write_tensor_csv, Labels};
pub use ops::{bilinear_step, dematricize, kronecker, matricize, mode_product, tucker_apply};

use crate::error::{Error, Result};

/// A tensor mode. Modes are numbered from 1 to match the usual notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
    Three,
    Four,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::One, Mode::Two, Mode::Three, Mode::Four];

    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
            Mode::Four => 3,
        }
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    values: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "tensor dims must be positive");
        Tensor4 {
            dims,
            values: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], values: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::dims("Tensor4::from_vec", format!("zero-sized dims {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if values.len() != len {
            return Err(Error::dims(
                "Tensor4::from_vec",
                format!("dims {dims:?} need {len} values, got {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Tensor4::from_vec"));
        }
        Ok(Tensor4 { dims, values })
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut out = Tensor4::zeros(dims);
        for t in 0..dims[3] {
            for w in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        let k = out.offset(i, j, w, t);
                        out.values[k] = f(i, j, w, t);
                    }
                }
            }
        }
        out
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn dim(&self, mode: Mode) -> usize {
        self.dims[mode.index()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, w: usize, t: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && w < self.dims[2] && t < self.dims[3]);
        i + self.dims[0] * (j + self.dims[1] * (w + self.dims[2] * t))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, w: usize, t: usize) -> f64 {
        self.values[self.offset(i, j, w, t)]
    }

    /// Panics if `value` is not finite.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, w: usize, t: usize, value: f64) {
        assert!(value.is_finite(), "Tensor4::set: non-finite value");
        let k = self.offset(i, j, w, t);
        self.values[k] = value;
    }

    /// The `d1 x d2` slice at fixed `(w, t)`, as a row-major matrix indexed `[i, j]`.
    pub fn slice(&self, w: usize, t: usize) -> Matrix {
        let [d1, d2, _, _] = self.dims;
        Matrix::from_fn(d1, d2, |i, j| self.get(i, j, w, t))
    }

    pub fn set_slice(&mut self, w: usize, t: usize, m: &Matrix) -> Result<()> {
        if m.rows() != self.dims[0] || m.cols() != self.dims[1] {
            return Err(Error::dims(
                "Tensor4::set_slice",
                format!("slice {}x{} into tensor {:?}", m.rows(), m.cols(), self.dims),
            ));
        }
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                let k = self.offset(i, j, w, t);
                self.values[k] = m.get(i, j);
            }
        }
        Ok(())
    }

    /// Copies the contiguous time range `[start, start + len)` into a new tensor.
    pub fn time_range(&self, start: usize, len: usize) -> Result<Tensor4> {
        let [d1, d2, d3, d4] = self.dims;
        if len == 0 || start + len > d4 {
            return Err(Error::dims(
                "Tensor4::time_range",
                format!("range {start}..{} outside time dim {d4}", start + len),
            ));
        }
        let block = d1 * d2 * d3;
        Ok(Tensor4 {
            dims: [d1, d2, d3, len],
            values: self.values[start * block..(start + len) * block].to_vec(),
        })
    }

    /// Selects a subset of mode-3 slices, in the given order.
    pub fn select_mode3(&self, indices: &[usize]) -> Result<Tensor4> {
        let [d1, d2, d3, d4] = self.dims;
        if indices.is_empty() || indices.iter().any(|&w| w >= d3) {
            return Err(Error::dims(
                "Tensor4::select_mode3",
                format!("indices {indices:?} invalid for mode-3 size {d3}"),
            ));
        }
        Ok(Tensor4::from_fn([d1, d2, indices.len(), d4], |i, j, w, t| {
            self.get(i, j, indices[w], t)
        }))
    }

    /// Sets every `(i, i, w, t)` entry to zero. Requires `d1 == d2`.
    pub fn zero_diagonal(&mut self) {
        let [d1, d2, d3, d4] = self.dims;
        debug_assert_eq!(d1, d2);
        for t in 0..d4 {
            for w in 0..d3 {
                for i in 0..d1.min(d2) {
                    let k = self.offset(i, i, w, t);
                    self.values[k] = 0.0;
                }
            }
        }
    }

    pub fn sub(&self, other: &Tensor4) -> Result<Tensor4> {
        if self.dims != other.dims {
            return Err(Error::dims(
                "Tensor4::sub",
                format!("{:?} vs {:?}", self.dims, other.dims),
            ));
        }
        Ok(Tensor4 {
            dims: self.dims,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dims must be positive");
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.values[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Row-major values.
    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::dims(
                "Matrix::from_vec",
                format!("{rows}x{cols} with {} values", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Matrix::from_vec"));
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dims("Matrix::from_rows", "ragged rows"));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Matrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Panics if `value` is not finite.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(value.is_finite(), "Matrix::set: non-finite value");
        self.values[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::dims(
                "Matrix::matmul",
                format!("{}x{} times {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let dst = &mut out.values[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.values[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (d, b) in dst.iter_mut().zip(rhs.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dims(
                "Matrix::matvec",
                format!("{}x{} times vector of {}", self.rows, self.cols, x.len()),
            ));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dims(
                "Matrix::add",
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Column-stacking vectorization, `vec(M)`.
    pub fn vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
