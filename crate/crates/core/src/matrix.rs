//! Dense column-major matrices and a strided GEMM wrapper.
//!
//! Every 2-D intermediate in the library (unfoldings, sketches, bases, core
//! slices) is a [`Matrix`]. Storage is a flat `Vec<f64>` in column-major
//! order, so reinterpreting a tensor as one of its unfoldings never moves
//! data.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i + n * i] = 1.0;
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Diagonal matrix from a list of entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i + n * i] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Pure reinterpretation of the flat column-major data with a new shape.
    pub fn reshape(self, rows: usize, cols: usize) -> Result<Self> {
        Matrix::from_col_major(rows, cols, self.data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.data[j + self.cols * i] = self.data[i + self.rows * j];
            }
        }
        t
    }

    /// First `k` columns (clipped to the column count).
    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        Matrix { rows: self.rows, cols: k, data: self.data[..self.rows * k].to_vec() }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, idx.len());
        for (dst, &src) in idx.iter().enumerate() {
            out.column_mut(dst).copy_from_slice(self.column(src));
        }
        out
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_range(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_fn(end - start, self.cols, |i, j| self[(start + i, j)])
    }

    pub fn hcat(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if parts.iter().any(|m| m.rows != rows) {
            return Err(Error::ShapeMismatch("hcat of matrices with different row counts".into()));
        }
        let mut data = Vec::with_capacity(rows * parts.iter().map(|m| m.cols).sum::<usize>());
        for m in parts {
            data.extend_from_slice(&m.data);
        }
        let cols = data.len().checked_div(rows).unwrap_or(parts.iter().map(|m| m.cols).sum());
        Ok(Matrix { rows, cols, data })
    }

    pub fn vcat(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        if parts.iter().any(|m| m.cols != cols) {
            return Err(Error::ShapeMismatch("vcat of matrices with different column counts".into()));
        }
        let rows: usize = parts.iter().map(|m| m.rows).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for m in parts {
            for j in 0..cols {
                out.data[offset + rows * j..offset + rows * j + m.rows].copy_from_slice(m.column(j));
            }
            offset += m.rows;
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.check_same_shape(other)?;
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(())
    }

    fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// `self * other`
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(
            1.0,
            MatRef::new(self),
            MatRef::new(other),
            0.0,
            MatMut::new(&mut out),
        );
        Ok(out)
    }

    /// `selfᵀ * other`
    pub fn tr_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm(1.0, MatRef::new(self).t(), MatRef::new(other), 0.0, MatMut::new(&mut out));
        Ok(out)
    }

    /// `self * otherᵀ`
    pub fn matmul_tr(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm(1.0, MatRef::new(self), MatRef::new(other).t(), 0.0, MatMut::new(&mut out));
        Ok(out)
    }

    /// `‖QᵀQ − I‖_max`, the orthonormality defect of the columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.tr_matmul(self).expect("square gram");
        let mut worst = 0.0f64;
        for j in 0..g.cols {
            for i in 0..g.rows {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + self.rows * j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + self.rows * j]
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    // scaled accumulation keeps tiny tails from underflowing
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let inv = 1.0 / scale;
    scale * v.iter().map(|x| (x * inv) * (x * inv)).sum::<f64>().sqrt()
}

/// Read-only strided view used by [`gemm`].
#[derive(Clone, Copy)]
pub struct MatRef<'a> {
    pub rows: usize,
    pub cols: usize,
    pub row_stride: isize,
    pub col_stride: isize,
    pub data: &'a [f64],
}

impl<'a> MatRef<'a> {
    pub fn new(m: &'a Matrix) -> Self {
        MatRef { rows: m.rows, cols: m.cols, row_stride: 1, col_stride: m.rows as isize, data: &m.data }
    }

    /// Column-major view over a raw slice.
    pub fn from_slice(data: &'a [f64], rows: usize, cols: usize) -> Self {
        assert!(data.len() >= rows * cols);
        MatRef { rows, cols, row_stride: 1, col_stride: rows as isize, data }
    }

    pub fn t(self) -> Self {
        MatRef {
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
            data: self.data,
        }
    }

    fn max_offset(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        ((self.rows - 1) as isize * self.row_stride + (self.cols - 1) as isize * self.col_stride) as usize
    }
}

/// Mutable strided view used by [`gemm`].
pub struct MatMut<'a> {
    pub rows: usize,
    pub cols: usize,
    pub row_stride: isize,
    pub col_stride: isize,
    pub data: &'a mut [f64],
}

impl<'a> MatMut<'a> {
    pub fn new(m: &'a mut Matrix) -> Self {
        MatMut { rows: m.rows, cols: m.cols, row_stride: 1, col_stride: m.rows as isize, data: &mut m.data }
    }

    pub fn from_slice(data: &'a mut [f64], rows: usize, cols: usize) -> Self {
        assert!(data.len() >= rows * cols);
        MatMut { rows, cols, row_stride: 1, col_stride: rows as isize, data }
    }

    pub fn strided(data: &'a mut [f64], rows: usize, cols: usize, row_stride: isize, col_stride: isize) -> Self {
        MatMut { rows, cols, row_stride, col_stride, data }
    }
}

/// `c ← alpha·a·b + beta·c` for arbitrary non-negative strides.
pub fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: MatMut<'_>) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!(a.rows, c.rows, "gemm row dimension");
    assert_eq!(b.cols, c.cols, "gemm column dimension");
    assert!(a.row_stride >= 0 && a.col_stride >= 0);
    assert!(b.row_stride >= 0 && b.col_stride >= 0);
    assert!(c.row_stride >= 0 && c.col_stride >= 0);
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.cols == 0 {
        // empty inner product: c ← beta·c
        for j in 0..c.cols {
            for i in 0..c.rows {
                let off = (i as isize * c.row_stride + j as isize * c.col_stride) as usize;
                c.data[off] *= beta;
            }
        }
        return;
    }
    assert!(a.max_offset() < a.data.len());
    assert!(b.max_offset() < b.data.len());
    let c_max = ((c.rows - 1) as isize * c.row_stride + (c.cols - 1) as isize * c.col_stride) as usize;
    assert!(c_max < c.data.len());
    // SAFETY: all three views were bounds-checked against their slices above,
    // and `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            c.data.as_mut_ptr(),
            c.row_stride,
            c.col_stride,
        );
    }
}
