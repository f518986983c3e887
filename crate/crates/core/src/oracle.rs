//! Entry oracles: tensors known only through an evaluation function.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::tensor::{linear_index, DenseTensor, Shape};

/// Thread-safe monotone evaluation counter.
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// A tensor accessed entry by entry.
///
/// Implementors provide the uncounted, 0-based [`value`](Self::value); the
/// provided methods do the counting.
pub trait TensorOracle: Sync {
    fn shape(&self) -> &Shape;

    /// Uncounted entry at a 0-based multi-index.
    fn value(&self, idx: &[usize]) -> f64;

    fn counter(&self) -> &EvalCounter;

    fn eval_count(&self) -> u64 {
        self.counter().get()
    }

    /// Counted entry at a 1-based multi-index.
    fn entry(&self, idx: &[usize]) -> Result<f64> {
        linear_index(idx, self.shape())?;
        self.counter().add(1);
        let zero: Vec<usize> = idx.iter().map(|i| i - 1).collect();
        Ok(self.value(&zero))
    }

    /// Fills `out` with the box `lo[k] ≤ i_k < hi[k]` (0-based, half open) in
    /// column-major order and counts every entry once.
    fn fill_block(&self, lo: &[usize], hi: &[usize], out: &mut [f64]) {
        let d = lo.len();
        let mut idx = lo.to_vec();
        for v in out.iter_mut() {
            *v = self.value(&idx);
            for k in 0..d {
                idx[k] += 1;
                if idx[k] < hi[k] {
                    break;
                }
                idx[k] = lo[k];
            }
        }
        self.counter().add(out.len() as u64);
    }

    /// Materializes the full tensor (counted).
    fn materialize(&self) -> Result<DenseTensor> {
        let shape = self.shape().clone();
        let n = shape.numel();
        if n > MATERIALIZE_LIMIT {
            return Err(Error::TooLarge(format!("{n} entries exceed the materialization guard")));
        }
        let mut values = vec![0.0; n];
        let lo = vec![0; shape.order()];
        self.fill_block(&lo, shape.dims(), &mut values);
        DenseTensor::new(shape, values)
    }
}

/// Largest tensor (in scalars) that verification helpers will allocate.
pub const MATERIALIZE_LIMIT: usize = 1 << 27;

/// A [`DenseTensor`] viewed as an oracle.
pub struct DenseOracle<'a> {
    tensor: &'a DenseTensor,
    counter: EvalCounter,
}

impl<'a> DenseOracle<'a> {
    pub fn new(tensor: &'a DenseTensor) -> Self {
        DenseOracle { tensor, counter: EvalCounter::default() }
    }
}

impl DenseTensor {
    pub fn as_oracle(&self) -> DenseOracle<'_> {
        DenseOracle::new(self)
    }
}

impl TensorOracle for DenseOracle<'_> {
    fn shape(&self) -> &Shape {
        self.tensor.shape()
    }

    fn value(&self, idx: &[usize]) -> f64 {
        let dims = self.tensor.dims();
        let mut off = 0;
        let mut stride = 1;
        for (&i, &n) in idx.iter().zip(dims) {
            off += i * stride;
            stride *= n;
        }
        self.tensor.values()[off]
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    fn fill_block(&self, lo: &[usize], hi: &[usize], out: &mut [f64]) {
        // contiguous runs along mode 1
        let dims = self.tensor.dims();
        let run = hi[0] - lo[0];
        let d = dims.len();
        let mut idx = lo.to_vec();
        let vals = self.tensor.values();
        for chunk in out.chunks_mut(run) {
            let mut off = 0;
            let mut stride = 1;
            for k in 0..d {
                off += idx[k] * stride;
                stride *= dims[k];
            }
            chunk.copy_from_slice(&vals[off..off + run]);
            for k in 1..d {
                idx[k] += 1;
                if idx[k] < hi[k] {
                    break;
                }
                idx[k] = lo[k];
            }
        }
        self.counter.add(out.len() as u64);
    }
}

/// Oracle backed by a closure of the 0-based multi-index.
pub struct FnOracle<F> {
    shape: Shape,
    f: F,
    counter: EvalCounter,
}

impl<F: Fn(&[usize]) -> f64 + Sync> FnOracle<F> {
    pub fn new(shape: Shape, f: F) -> Self {
        FnOracle { shape, f, counter: EvalCounter::default() }
    }
}

impl<F: Fn(&[usize]) -> f64 + Sync> TensorOracle for FnOracle<F> {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn value(&self, idx: &[usize]) -> f64 {
        (self.f)(idx)
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }
}

impl<T: TensorOracle + ?Sized> TensorOracle for &T {
    fn shape(&self) -> &Shape {
        (**self).shape()
    }
    fn value(&self, idx: &[usize]) -> f64 {
        (**self).value(idx)
    }
    fn counter(&self) -> &EvalCounter {
        (**self).counter()
    }
    fn fill_block(&self, lo: &[usize], hi: &[usize], out: &mut [f64]) {
        (**self).fill_block(lo, hi, out)
    }
}

impl<T: TensorOracle + ?Sized + Send> TensorOracle for Box<T> {
    fn shape(&self) -> &Shape {
        (**self).shape()
    }
    fn value(&self, idx: &[usize]) -> f64 {
        (**self).value(idx)
    }
    fn counter(&self) -> &EvalCounter {
        (**self).counter()
    }
    fn fill_block(&self, lo: &[usize], hi: &[usize], out: &mut [f64]) {
        (**self).fill_block(lo, hi, out)
    }
}
