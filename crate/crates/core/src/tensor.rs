//! Dense tensors, unfoldings, matricizations and k-mode products.
//!
//! Multi-indices and mode numbers are 1-based at this API surface; flat
//! offsets are 0-based.

use crate::error::{Error, Result};
use crate::matrix::{gemm, MatMut, MatRef, Matrix};

/// Dimensions `n_1..n_d` of a tensor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("a tensor needs at least one mode".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("zero-length mode in {dims:?}")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::TooLarge(format!("element count of {dims:?} overflows")))?;
        Ok(Shape(dims))
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// `Π_{s ≤ k} n_s` (1-based `k`, `k = 0` gives 1).
    pub fn prefix(&self, k: usize) -> usize {
        self.0[..k].iter().product()
    }

    /// `Π_{s > k} n_s` (1-based `k`).
    pub fn suffix(&self, k: usize) -> usize {
        self.0[k..].iter().product()
    }

    fn check_mode(&self, k: usize, max: usize) -> Result<()> {
        if k == 0 || k > max {
            return Err(Error::InvalidMode { mode: k, order: self.order() });
        }
        Ok(())
    }
}

/// Offset of the 1-based multi-index `idx` in column-major storage.
pub fn linear_index(idx: &[usize], shape: &Shape) -> Result<usize> {
    let dims = shape.dims();
    if idx.len() != dims.len() || idx.iter().zip(dims).any(|(&i, &n)| i == 0 || i > n) {
        return Err(Error::IndexOutOfRange { index: idx.to_vec(), dims: dims.to_vec() });
    }
    let mut off = 0;
    let mut stride = 1;
    for (&i, &n) in idx.iter().zip(dims) {
        off += (i - 1) * stride;
        stride *= n;
    }
    Ok(off)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.numel() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for dims {:?}",
                values.len(),
                shape.dims()
            )));
        }
        Ok(DenseTensor { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.numel();
        DenseTensor { shape, values: vec![0.0; n] }
    }

    /// Builds a tensor from a function of the 0-based multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n = shape.numel();
        let mut idx = vec![0usize; shape.order()];
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f(&idx));
            for (i, &d) in idx.iter_mut().zip(shape.dims()) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        DenseTensor { shape, values }
    }

    #[inline]
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Entry at a 1-based multi-index.
    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.values[linear_index(idx, &self.shape)?])
    }

    /// `X_k`: the first `k` modes index rows. Pure reinterpretation.
    pub fn unfold(&self, k: usize) -> Result<Matrix> {
        self.shape.check_mode(k, self.shape.order() - 1)?;
        Matrix::from_col_major(self.shape.prefix(k), self.shape.suffix(k), self.values.clone())
    }

    /// `X_(k)`: mode-`k` fibers as columns.
    pub fn matricize(&self, k: usize) -> Result<Matrix> {
        self.shape.check_mode(k, self.shape.order())?;
        let n = self.dims()[k - 1];
        let left = self.shape.prefix(k - 1);
        let right = self.shape.suffix(k);
        let mut m = Matrix::zeros(n, left * right);
        let out = m.as_mut_slice();
        for r in 0..right {
            for i in 0..n {
                let src = &self.values[left * (i + n * r)..left * (i + n * r + 1)];
                for (l, &v) in src.iter().enumerate() {
                    out[i + n * (l + left * r)] = v;
                }
            }
        }
        Ok(m)
    }

    /// `X ×_k A`.
    pub fn mode_product(&self, a: &Matrix, k: usize) -> Result<DenseTensor> {
        self.shape.check_mode(k, self.shape.order())?;
        let n = self.dims()[k - 1];
        if a.cols() != n {
            return Err(Error::ShapeMismatch(format!(
                "mode-{k} product needs {n} columns, matrix has {}",
                a.cols()
            )));
        }
        let mut dims = self.dims().to_vec();
        dims[k - 1] = a.rows();
        let shape = Shape::new(dims)?;
        let mut out = DenseTensor::zeros(shape);
        mode_product_raw(&self.values, self.dims(), k - 1, a, &mut out.values);
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::matrix::norm2(&self.values)
    }

    pub fn reshape(self, shape: Shape) -> Result<DenseTensor> {
        DenseTensor::new(shape, self.values)
    }
}

/// Inverse of [`DenseTensor::unfold`].
pub fn refold(m: Matrix, shape: &Shape) -> Result<DenseTensor> {
    if m.len() != shape.numel() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix cannot be refolded into {:?}",
            m.rows(),
            m.cols(),
            shape.dims()
        )));
    }
    DenseTensor::new(shape.clone(), m.into_vec())
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    t.frobenius_norm()
}

/// `out ← X ×_mode A` on raw column-major storage, `mode` 0-based.
pub(crate) fn mode_product_raw(x: &[f64], dims: &[usize], mode: usize, a: &Matrix, out: &mut [f64]) {
    let left: usize = dims[..mode].iter().product();
    let n = dims[mode];
    let right: usize = dims[mode + 1..].iter().product();
    let m = a.rows();
    debug_assert_eq!(out.len(), left * m * right);
    if left == 1 {
        // A (m×n) · X (n×right)
        gemm(
            1.0,
            MatRef::new(a),
            MatRef::from_slice(x, n, right),
            0.0,
            MatMut::from_slice(out, m, right),
        );
        return;
    }
    for r in 0..right {
        // slice (left × n) · Aᵀ (n × m)
        let xs = &x[left * n * r..left * n * (r + 1)];
        let os = &mut out[left * m * r..left * m * (r + 1)];
        gemm(
            1.0,
            MatRef::from_slice(xs, left, n),
            MatRef::new(a).t(),
            0.0,
            MatMut::from_slice(os, left, m),
        );
    }
}
