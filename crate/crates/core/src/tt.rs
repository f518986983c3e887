//! Tensor-train format, sequential TTSVD and error measurement.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::random::SeededStream;
use crate::kernels::svd::{truncated_svd, Truncation};
use crate::matrix::{gemm, MatMut, MatRef, Matrix};
use crate::oracle::{EvalCounter, TensorOracle, MATERIALIZE_LIMIT};
use crate::tensor::{DenseTensor, Shape};

/// A 3-way core with dims `(left, size, right)`, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TtCore {
    left: usize,
    size: usize,
    right: usize,
    data: Vec<f64>,
}

impl TtCore {
    pub fn new(left: usize, size: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != left * size * right {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a ({left}, {size}, {right}) core",
                data.len()
            )));
        }
        Ok(TtCore { left, size, right, data })
    }

    pub fn zeros(left: usize, size: usize, right: usize) -> Self {
        TtCore { left, size, right, data: vec![0.0; left * size * right] }
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left
    }
    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }
    #[inline]
    pub fn right(&self) -> usize {
        self.right
    }
    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[a + self.left * (i + self.size * b)]
    }

    /// `G(:, i, :)` (0-based `i`).
    pub fn slice(&self, i: usize) -> Matrix {
        Matrix::from_fn(self.left, self.right, |a, b| self.get(a, i, b))
    }

    /// First unfolding `(left·size) × right`.
    pub fn unfold_left(&self) -> Matrix {
        Matrix::from_col_major(self.left * self.size, self.right, self.data.clone()).expect("core shape")
    }

    /// Second unfolding `left × (size·right)`.
    pub fn unfold_right(&self) -> Matrix {
        Matrix::from_col_major(self.left, self.size * self.right, self.data.clone()).expect("core shape")
    }

    /// Mode-2 matricization `size × (left·right)`.
    pub fn matricize_middle(&self) -> Matrix {
        self.as_tensor().matricize(2).expect("order 3")
    }

    pub fn as_tensor(&self) -> DenseTensor {
        DenseTensor::new(
            Shape::new(vec![self.left, self.size, self.right]).expect("positive core dims"),
            self.data.clone(),
        )
        .expect("core shape")
    }

    pub fn from_tensor(t: DenseTensor) -> Result<Self> {
        let d = t.dims().to_vec();
        if d.len() != 3 {
            return Err(Error::ShapeMismatch(format!("core must have order 3, got {d:?}")));
        }
        TtCore::new(d[0], d[1], d[2], t.into_values())
    }

    /// `G ×_2 A`.
    pub fn mode2_product(&self, a: &Matrix) -> Result<TtCore> {
        TtCore::from_tensor(self.as_tensor().mode_product(a, 2)?)
    }

    /// Scalars stored.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtTensor {
    cores: Vec<TtCore>,
}

impl TtTensor {
    pub fn new(cores: Vec<TtCore>) -> Result<Self> {
        let (first, last) = match (cores.first(), cores.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidRanks("a TT tensor needs at least one core".into())),
        };
        if first.left != 1 || last.right != 1 {
            return Err(Error::InvalidRanks(format!(
                "boundary core sizes must be 1, got {} and {}",
                first.left, last.right
            )));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(Error::InvalidRanks(format!(
                    "core {} has right size {} but core {} has left size {}",
                    k + 1,
                    w[0].right,
                    k + 2,
                    w[1].left
                )));
            }
        }
        if cores.iter().any(|c| c.size == 0) {
            return Err(Error::InvalidArgument("zero-length mode".into()));
        }
        Ok(TtTensor { cores })
    }

    pub fn cores(&self) -> &[TtCore] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<TtCore> {
        self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.size).collect()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.dims()).expect("validated")
    }

    /// `s_0, …, s_d`.
    pub fn core_sizes(&self) -> Vec<usize> {
        std::iter::once(1).chain(self.cores.iter().map(|c| c.right)).collect()
    }

    /// `Σ_k s_{k−1} n_k s_k`.
    pub fn storage_count(&self) -> usize {
        self.cores.iter().map(TtCore::len).sum()
    }

    /// Entry at a 1-based multi-index.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        let dims = self.dims();
        if idx.len() != dims.len() || idx.iter().zip(&dims).any(|(&i, &n)| i == 0 || i > n) {
            return Err(Error::IndexOutOfRange { index: idx.to_vec(), dims });
        }
        let zero: Vec<usize> = idx.iter().map(|i| i - 1).collect();
        Ok(self.entry0(&zero))
    }

    /// Entry at a 0-based multi-index, accumulated left to right.
    pub(crate) fn entry0(&self, idx: &[usize]) -> f64 {
        let mut v = vec![1.0];
        let mut next = Vec::new();
        for (core, &i) in self.cores.iter().zip(idx) {
            next.clear();
            next.resize(core.right, 0.0);
            for (b, nb) in next.iter_mut().enumerate() {
                let base = core.left * (i + core.size * b);
                *nb = v.iter().zip(&core.data[base..base + core.left]).map(|(x, g)| x * g).sum();
            }
            std::mem::swap(&mut v, &mut next);
        }
        v[0]
    }

    /// Product of the first `k` cores as an `(n_1⋯n_k) × s_k` matrix.
    pub fn left_interface(&self, k: usize) -> Result<Matrix> {
        let mut m = Matrix::identity(1);
        for core in &self.cores[..k] {
            let rows = m.rows();
            if rows.checked_mul(core.size * core.right).is_none_or(|n| n > MATERIALIZE_LIMIT) {
                return Err(Error::TooLarge(format!("left interface of {k} cores")));
            }
            let mut out = Matrix::zeros(rows, core.size * core.right);
            gemm(
                1.0,
                MatRef::new(&m),
                MatRef::from_slice(&core.data, core.left, core.size * core.right),
                0.0,
                MatMut::new(&mut out),
            );
            m = out.reshape(rows * core.size, core.right)?;
        }
        Ok(m)
    }

    pub fn full(&self) -> Result<DenseTensor> {
        let shape = self.shape();
        if shape.numel() > MATERIALIZE_LIMIT {
            return Err(Error::TooLarge(format!("{} entries exceed the materialization guard", shape.numel())));
        }
        let m = self.left_interface(self.order())?;
        DenseTensor::new(shape, m.into_vec())
    }

    /// Borrowing oracle view with its own evaluation counter.
    pub fn as_oracle(&self) -> TtOracle<'_> {
        TtOracle { tt: self, shape: self.shape(), counter: EvalCounter::default() }
    }
}

pub struct TtOracle<'a> {
    tt: &'a TtTensor,
    shape: Shape,
    counter: EvalCounter,
}

impl TensorOracle for TtOracle<'_> {
    fn shape(&self) -> &Shape {
        &self.shape
    }
    fn value(&self, idx: &[usize]) -> f64 {
        self.tt.entry0(idx)
    }
    fn counter(&self) -> &EvalCounter {
        &self.counter
    }
}

/// Tolerance or explicit ranks `r_1..r_{d−1}`.
#[derive(Clone, Debug, PartialEq)]
pub enum TtTarget {
    Tol(f64),
    Ranks(Vec<usize>),
}

impl TtTarget {
    pub(crate) fn validate(&self, d: usize) -> Result<()> {
        match self {
            TtTarget::Tol(t) if !(*t > 0.0 && *t < 1.0) => Err(Error::InvalidTolerance(*t)),
            TtTarget::Ranks(r) if r.len() != d.saturating_sub(1) => Err(Error::InvalidRanks(format!(
                "expected {} ranks, got {}",
                d.saturating_sub(1),
                r.len()
            ))),
            TtTarget::Ranks(r) if r.contains(&0) => Err(Error::InvalidRanks("ranks must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Left-to-right TTSVD; in tolerance mode every step keeps a tail of at most
/// `tol·‖X‖_F/√(d−1)`.
pub fn ttsvd(t: &DenseTensor, target: &TtTarget) -> Result<TtTensor> {
    let dims = t.dims().to_vec();
    let d = dims.len();
    target.validate(d)?;
    if d == 1 {
        return TtTensor::new(vec![TtCore::new(1, dims[0], 1, t.values().to_vec())?]);
    }
    let step_bound = match target {
        TtTarget::Tol(tol) => tol * t.frobenius_norm() / ((d - 1) as f64).sqrt(),
        TtTarget::Ranks(_) => 0.0,
    };
    let mut cores = Vec::with_capacity(d);
    let mut rank = 1;
    let mut c = Matrix::from_col_major(dims[0], t.values().len() / dims[0], t.values().to_vec())?;
    for k in 0..d - 1 {
        let rule = match target {
            TtTarget::Tol(_) => Truncation::Absolute(step_bound),
            TtTarget::Ranks(r) => Truncation::Rank(r[k]),
        };
        let svd = truncated_svd(&c, rule)?;
        // keep at least one term so the chain stays valid for a zero tensor
        let (u, svt, r) = if svd.rank == 0 {
            let mut u = Matrix::zeros(c.rows(), 1);
            u[(0, 0)] = 1.0;
            (u, Matrix::zeros(1, c.cols()), 1)
        } else {
            (svd.u.clone(), svd.sigma_vt(), svd.rank)
        };
        cores.push(TtCore::new(rank, dims[k], r, u.into_vec())?);
        rank = r;
        let cols = svt.cols() / dims[k + 1];
        c = svt.reshape(r * dims[k + 1], cols)?;
    }
    cores.push(TtCore::new(rank, dims[d - 1], 1, c.into_vec())?);
    TtTensor::new(cores)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrorMode {
    Full,
    Sample { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorEstimate {
    pub relative_error: f64,
    /// Standard error of the estimate (sample mode only).
    pub std_error: Option<f64>,
    pub mode: ErrorMode,
}

/// Relative Frobenius error of `approx` against `reference`.
pub fn tt_error(reference: &dyn TensorOracle, approx: &TtTensor, mode: ErrorMode) -> Result<ErrorEstimate> {
    let shape = reference.shape().clone();
    if shape.dims() != approx.dims().as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "reference dims {:?} vs TT dims {:?}",
            shape.dims(),
            approx.dims()
        )));
    }
    match mode {
        ErrorMode::Full => {
            let d = shape.order();
            let last = shape.dims()[d - 1];
            let head = shape.numel() / last;
            let left = approx.left_interface(d - 1)?;
            let core = &approx.cores()[d - 1];
            let mut lo = vec![0; d];
            let mut hi = shape.dims().to_vec();
            let mut x = vec![0.0; head];
            let (mut diff2, mut ref2) = (0.0, 0.0);
            for i in 0..last {
                lo[d - 1] = i;
                hi[d - 1] = i + 1;
                reference.fill_block(&lo, &hi, &mut x);
                let g: Vec<f64> = (0..core.left()).map(|a| core.get(a, i, 0)).collect();
                for (r, &xv) in x.iter().enumerate() {
                    let mut y = 0.0;
                    for (a, ga) in g.iter().enumerate() {
                        y += left[(r, a)] * ga;
                    }
                    diff2 += (xv - y) * (xv - y);
                    ref2 += xv * xv;
                }
            }
            Ok(ErrorEstimate { relative_error: (diff2 / ref2).sqrt(), std_error: None, mode })
        }
        ErrorMode::Sample { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("sample count must be positive".into()));
            }
            let mut rng = SeededStream::new(seed, 0x5A11_7E57).uniform_rng();
            let mut idx = vec![0; shape.order()];
            let mut a = Vec::with_capacity(samples);
            let mut b = Vec::with_capacity(samples);
            for _ in 0..samples {
                for (i, &n) in idx.iter_mut().zip(shape.dims()) {
                    *i = rng.random_range(0..n);
                }
                let x = reference.value(&idx);
                let y = approx.entry0(&idx);
                a.push((x - y) * (x - y));
                b.push(x * x);
            }
            reference.counter().add(samples as u64);
            Ok(ratio_estimate(&a, &b, mode))
        }
    }
}

/// `sqrt(mean(a)/mean(b))` with a delta-method standard error.
fn ratio_estimate(a: &[f64], b: &[f64], mode: ErrorMode) -> ErrorEstimate {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let ratio = ma / mb;
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        vaa += (x - ma) * (x - ma);
        vbb += (y - mb) * (y - mb);
        vab += (x - ma) * (y - mb);
    }
    let denom = (n - 1.0).max(1.0);
    let (vaa, vbb, vab) = (vaa / denom, vbb / denom, vab / denom);
    let var_ratio = ((vaa - 2.0 * ratio * vab + ratio * ratio * vbb) / (n * mb * mb)).max(0.0);
    let rel = ratio.sqrt();
    let se = if rel > 0.0 { var_ratio.sqrt() / (2.0 * rel) } else { var_ratio.sqrt().sqrt() };
    ErrorEstimate { relative_error: rel, std_error: Some(se), mode }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_tt;
    use crate::kernels::random::gaussian_matrix;

    #[test]
    fn rank_one_entries() {
        let u = [1.0, 2.0];
        let v = [3.0, 5.0, 7.0];
        let w = [0.5, -1.0];
        let tt = TtTensor::new(vec![
            TtCore::new(1, 2, 1, u.to_vec()).unwrap(),
            TtCore::new(1, 3, 1, v.to_vec()).unwrap(),
            TtCore::new(1, 2, 1, w.to_vec()).unwrap(),
        ])
        .unwrap();
        assert_eq!(tt.entry(&[2, 3, 2]).unwrap(), -(2.0 * 7.0));
        assert!(tt.entry(&[3, 1, 1]).is_err());
        let full = tt.full().unwrap();
        assert_eq!(full.get(&[1, 2, 1]).unwrap(), 1.0 * 5.0 * 0.5);
        assert_eq!(tt.storage_count(), 7);
        let single = TtTensor::new(vec![TtCore::new(1, 3, 1, v.to_vec()).unwrap()]).unwrap();
        assert_eq!(single.entry(&[2]).unwrap(), 5.0);
    }

    #[test]
    fn chain_validation() {
        assert!(TtTensor::new(vec![]).is_err());
        assert!(TtTensor::new(vec![TtCore::zeros(1, 2, 2), TtCore::zeros(3, 2, 1)]).is_err());
        assert!(TtTensor::new(vec![TtCore::zeros(2, 2, 1)]).is_err());
    }

    #[test]
    fn storage_formula() {
        let tt = TtTensor::new(vec![TtCore::zeros(1, 4, 2), TtCore::zeros(2, 4, 2), TtCore::zeros(2, 4, 1)]).unwrap();
        assert_eq!(tt.storage_count(), 32);
        assert!(tt.full().unwrap().values().iter().all(|&v| v == 0.0));
        let (d, r, n) = (5, 3, 4);
        let mut cores = vec![TtCore::zeros(1, n, r)];
        cores.extend((0..d - 2).map(|_| TtCore::zeros(r, n, r)));
        cores.push(TtCore::zeros(r, n, 1));
        assert_eq!(TtTensor::new(cores).unwrap().storage_count(), (d - 2) * r * r * n + 2 * r * n);
    }

    #[test]
    fn entry_matches_full() {
        let tt = random_tt(&[3, 4, 2, 5], &[2, 3, 2], 9).unwrap();
        let full = tt.full().unwrap();
        let mut rng = SeededStream::new(1, 1).uniform_rng();
        for _ in 0..20 {
            let idx: Vec<usize> = tt.dims().iter().map(|&n| rng.random_range(1..=n)).collect();
            assert!((tt.entry(&idx).unwrap() - full.get(&idx).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn ttsvd_exact_rank() {
        let tt = random_tt(&[4, 5, 6], &[2, 2], 3).unwrap();
        let x = tt.full().unwrap();
        let rec = ttsvd(&x, &TtTarget::Tol(1e-10)).unwrap();
        assert_eq!(rec.core_sizes(), vec![1, 2, 2, 1]);
        let err = tt_error(&x.as_oracle(), &rec, ErrorMode::Full).unwrap();
        assert!(err.relative_error <= 1e-10);
        assert!(ttsvd(&x, &TtTarget::Tol(0.0)).is_err());
        assert!(ttsvd(&x, &TtTarget::Ranks(vec![2])).is_err());
    }

    #[test]
    fn ttsvd_rank_one() {
        let shape = Shape::new(vec![3, 4, 5, 2]).unwrap();
        let x = DenseTensor::from_fn(shape, |i| (1 + i[0]) as f64 * (2.0 - i[1] as f64) * (i[2] as f64 + 0.5) * (i[3] + 1) as f64);
        let rec = ttsvd(&x, &TtTarget::Tol(1e-12)).unwrap();
        assert_eq!(rec.core_sizes(), vec![1, 1, 1, 1, 1]);
    }

    #[test]
    fn error_modes() {
        let tt = random_tt(&[20, 20, 20], &[3, 3], 5).unwrap();
        let x = tt.full().unwrap();
        let exact = tt_error(&x.as_oracle(), &tt, ErrorMode::Full).unwrap();
        assert!(exact.relative_error <= 1e-14);

        // perturb one entry by δ
        let mut y = x.clone();
        let delta = 0.25;
        y.values_mut()[17] += delta;
        let e = tt_error(&y.as_oracle(), &tt, ErrorMode::Full).unwrap();
        assert!((e.relative_error - delta / y.frobenius_norm()).abs() < 1e-12);

        // noisy reference: sampled estimate within 3 standard errors
        let noise = gaussian_matrix(8000, 1, SeededStream::new(2, 2));
        let scale = 0.05 * x.frobenius_norm() / noise.frobenius_norm();
        let z = DenseTensor::new(
            x.shape().clone(),
            x.values().iter().zip(noise.as_slice()).map(|(a, b)| a + scale * b).collect(),
        )
        .unwrap();
        let full = tt_error(&z.as_oracle(), &tt, ErrorMode::Full).unwrap().relative_error;
        let s = tt_error(&z.as_oracle(), &tt, ErrorMode::Sample { samples: 4000, seed: 3 }).unwrap();
        let se = s.std_error.unwrap();
        assert!((s.relative_error - full).abs() <= 3.0 * se, "{} vs {full} (se {se})", s.relative_error);
        assert!(tt_error(&z.as_oracle(), &tt, ErrorMode::Sample { samples: 0, seed: 3 }).is_err());
    }
}
