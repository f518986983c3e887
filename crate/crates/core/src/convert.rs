//! Tucker2TT and TT2Tucker conversions, without materializing the tensor.

use crate::error::{Error, Result};
use crate::kernels::qr::{cpqr_truncated, householder_qr};
use crate::kernels::svd::{numerical_rank, singular_values, truncated_svd, Truncation};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;
use crate::tt::{ttsvd, TtCore, TtTarget, TtTensor};
use crate::tucker::{TuckerTarget, TuckerTensor};

/// TT-decompose the Tucker core, then push each factor into its core.
pub fn tucker2tt(t: &TuckerTensor, target: &TtTarget) -> Result<TtTensor> {
    let h = ttsvd(t.core(), target)?;
    let cores = h
        .cores()
        .iter()
        .zip(t.factors())
        .map(|(c, a)| c.mode2_product(a))
        .collect::<Result<Vec<_>>>()?;
    TtTensor::new(cores)
}

/// Orthonormal Tucker factors plus a Tucker core held in TT form.
#[derive(Clone, Debug, PartialEq)]
pub struct TtTucker {
    pub factors: Vec<Matrix>,
    pub core: TtTensor,
    /// Per mode, the sine of the largest principal angle between the range of
    /// the input core's 2nd matricization and the tensor's mode unfolding
    /// (1 when their dimensions differ). Nonzero only for non-optimal ranks.
    pub span_mismatch: Vec<f64>,
}

impl TtTucker {
    pub fn to_tucker(&self) -> Result<TuckerTensor> {
        TuckerTensor::new(self.core.full()?, self.factors.clone())
    }

    pub fn full(&self) -> Result<DenseTensor> {
        self.to_tucker()?.full()
    }

    /// Back to a plain TT by absorbing the factors.
    pub fn to_tt(&self) -> Result<TtTensor> {
        let cores = self
            .core
            .cores()
            .iter()
            .zip(&self.factors)
            .map(|(c, a)| c.mode2_product(a))
            .collect::<Result<Vec<_>>>()?;
        TtTensor::new(cores)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BasisMethod {
    #[default]
    Svd,
    Cpqr,
}

/// Left factors `M_j` and right factors `N_j` such that
/// `M_j ×_1 G_j ×_3 N_jᵀ` carries the whole tensor's norm and the column
/// space of its mode-2 matricization equals that of `X_(j)`.
pub(crate) fn interface_factors(tt: &TtTensor) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
    let cores = tt.cores();
    let d = cores.len();
    let mut left = vec![Matrix::identity(1)];
    for core in &cores[..d - 1] {
        let m = left.last().expect("seeded");
        let w = m.matmul(&core.unfold_right())?;
        let rows = w.rows() * core.size();
        let (_, r) = householder_qr(&w.reshape(rows, core.right())?);
        left.push(r);
    }
    let mut right = vec![Matrix::identity(1)];
    for core in cores[1..].iter().rev() {
        let n = right.last().expect("seeded");
        let w = core.unfold_left().matmul(n)?;
        let cols = w.cols() * core.size();
        let wt = w.reshape(core.left(), cols)?.transpose();
        let (_, r) = householder_qr(&wt);
        right.push(r.transpose());
    }
    right.reverse();
    Ok((left, right))
}

/// The core `j` (0-based) weighted by its interface factors.
pub(crate) fn weighted_core(core: &TtCore, m: &Matrix, n: &Matrix) -> Result<TtCore> {
    let w = m.matmul(&core.unfold_right())?;
    let rows = w.rows();
    let t = w.reshape(rows * core.size(), core.right())?.matmul(n)?;
    let cols = t.cols();
    TtCore::new(rows, core.size(), cols, t.into_vec())
}

fn numerical_range(a: &Matrix) -> Result<Matrix> {
    if a.max_abs() == 0.0 {
        return Ok(Matrix::zeros(a.rows(), 0));
    }
    Ok(truncated_svd(a, Truncation::Tol(1e-10))?.u)
}

/// Sine of the largest principal angle between the numerical ranges of `a`
/// and `b`, or 1 when the ranges have different dimensions.
pub fn range_mismatch(a: &Matrix, b: &Matrix) -> Result<f64> {
    let (qa, qb) = (numerical_range(a)?, numerical_range(b)?);
    if qa.cols() != qb.cols() {
        return Ok(1.0);
    }
    if qa.cols() == 0 {
        return Ok(0.0);
    }
    let resid = qb.sub(&qa.matmul(&qa.tr_matmul(&qb)?)?)?;
    Ok(singular_values(&resid).first().copied().unwrap_or(0.0).min(1.0))
}

pub fn tt2tucker(tt: &TtTensor, target: &TuckerTarget, basis: BasisMethod) -> Result<TtTucker> {
    let d = tt.order();
    let (left, right) = interface_factors(tt)?;
    let weighted: Vec<TtCore> = (0..d)
        .map(|j| weighted_core(&tt.cores()[j], &left[j], &right[j]))
        .collect::<Result<_>>()?;
    let norm = crate::matrix::norm2(weighted[0].data());
    let rules: Vec<Truncation> = match target {
        TuckerTarget::Tol(tol) => {
            if !(*tol > 0.0 && *tol < 1.0) {
                return Err(Error::InvalidTolerance(*tol));
            }
            let per = tol / (d as f64).sqrt();
            vec![
                match basis {
                    BasisMethod::Svd => Truncation::Absolute(per * norm),
                    BasisMethod::Cpqr => Truncation::Tol(per),
                };
                d
            ]
        }
        TuckerTarget::Ranks(r) => {
            if r.len() != d || r.contains(&0) {
                return Err(Error::InvalidRanks(format!("need {d} positive ranks, got {r:?}")));
            }
            r.iter().map(|&k| Truncation::Rank(k)).collect()
        }
    };
    let span_mismatch = weighted
        .iter()
        .zip(tt.cores())
        .map(|(w, c)| range_mismatch(&c.matricize_middle(), &w.matricize_middle()))
        .collect::<Result<_>>()?;
    let mut factors = Vec::with_capacity(d);
    let mut cores = Vec::with_capacity(d);
    for (j, w) in weighted.iter().enumerate() {
        let mat = w.matricize_middle();
        let mut a = match basis {
            BasisMethod::Svd => truncated_svd(&mat, rules[j])?.u,
            BasisMethod::Cpqr => cpqr_truncated(&mat, rules[j])?.q,
        };
        if a.cols() == 0 {
            a = Matrix::zeros(w.size(), 1);
            a[(0, 0)] = 1.0;
        }
        cores.push(tt.cores()[j].mode2_product(&a.transpose())?);
        factors.push(a);
    }
    Ok(TtTucker { factors, core: TtTensor::new(cores)?, span_mismatch })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankLemmaReport {
    /// Numerical ranks of `X_1..X_{d−1}` of the materialized tensor.
    pub tensor_ranks: Vec<usize>,
    /// Numerical ranks of the matching unfoldings of the Tucker core.
    pub core_ranks: Vec<usize>,
}

impl RankLemmaReport {
    pub fn holds(&self) -> bool {
        self.tensor_ranks == self.core_ranks
    }
}

/// Compares unfolding ranks (relative tolerance 1e-10) of a Tucker tensor
/// and of its core.
pub fn verify_rank_lemma(t: &TuckerTensor) -> Result<RankLemmaReport> {
    let x = t.full()?;
    let d = x.dims().len();
    let mut tensor_ranks = Vec::with_capacity(d.saturating_sub(1));
    let mut core_ranks = Vec::with_capacity(d.saturating_sub(1));
    for j in 1..d {
        tensor_ranks.push(numerical_rank(&x.unfold(j)?, 1e-10));
        core_ranks.push(numerical_rank(&t.core().unfold(j)?, 1e-10));
    }
    Ok(RankLemmaReport { tensor_ranks, core_ranks })
}
