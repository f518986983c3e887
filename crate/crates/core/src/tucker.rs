//! Orthogonal Tucker format and HOSVD.

use crate::error::{Error, Result};
use crate::kernels::svd::{truncated_svd, Truncation};
use crate::matrix::Matrix;
use crate::oracle::MATERIALIZE_LIMIT;
use crate::tensor::{DenseTensor, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct TuckerTensor {
    core: DenseTensor,
    factors: Vec<Matrix>,
}

impl TuckerTensor {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.dims().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for a core of order {}",
                factors.len(),
                core.dims().len()
            )));
        }
        for (k, (f, &t)) in factors.iter().zip(core.dims()).enumerate() {
            if f.cols() != t {
                return Err(Error::ShapeMismatch(format!(
                    "factor {} has {} columns, core mode has size {t}",
                    k + 1,
                    f.cols()
                )));
            }
        }
        Ok(TuckerTensor { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    /// Factor widths `t_1..t_d`.
    pub fn core_dims(&self) -> &[usize] {
        self.core.dims()
    }

    /// Largest `‖A_kᵀA_k − I‖_max` over the factors.
    pub fn orthonormality_defect(&self) -> f64 {
        self.factors.iter().map(Matrix::orthonormality_defect).fold(0.0, f64::max)
    }

    /// `G ×_1 A_1 ⋯ ×_d A_d`.
    pub fn full(&self) -> Result<DenseTensor> {
        let n: usize = self.dims().iter().product();
        if n > MATERIALIZE_LIMIT {
            return Err(Error::TooLarge(format!("{n} entries exceed the materialization guard")));
        }
        let mut t = self.core.clone();
        for (k, a) in self.factors.iter().enumerate() {
            t = t.mode_product(a, k + 1)?;
        }
        Ok(t)
    }
}

/// Tolerance or explicit multilinear ranks.
#[derive(Clone, Debug, PartialEq)]
pub enum TuckerTarget {
    Tol(f64),
    Ranks(Vec<usize>),
}

/// HOSVD; in tolerance mode each factor drops a tail of at most
/// `tol·‖X‖_F/√d`. The `d` matricization SVDs run on up to `workers`
/// threads; results do not depend on the thread count.
pub fn hosvd(t: &DenseTensor, target: &TuckerTarget, workers: usize) -> Result<TuckerTensor> {
    let d = t.dims().len();
    let rules: Vec<Truncation> = match target {
        TuckerTarget::Tol(tol) => {
            if !(*tol > 0.0 && *tol < 1.0) {
                return Err(Error::InvalidTolerance(*tol));
            }
            vec![Truncation::Absolute(tol * t.frobenius_norm() / (d as f64).sqrt()); d]
        }
        TuckerTarget::Ranks(r) => {
            if r.len() != d || r.contains(&0) {
                return Err(Error::InvalidRanks(format!("need {d} positive ranks, got {r:?}")));
            }
            r.iter().map(|&k| Truncation::Rank(k)).collect()
        }
    };
    let factor = |k: usize| -> Result<Matrix> {
        let svd = truncated_svd(&t.matricize(k + 1)?, rules[k])?;
        if svd.rank == 0 {
            let mut u = Matrix::zeros(t.dims()[k], 1);
            u[(0, 0)] = 1.0;
            return Ok(u);
        }
        Ok(svd.u)
    };
    let workers = workers.clamp(1, d);
    let factors: Vec<Matrix> = if workers == 1 {
        (0..d).map(factor).collect::<Result<_>>()?
    } else {
        let mut slots: Vec<Option<Result<Matrix>>> = (0..d).map(|_| None).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let factor = &factor;
                    s.spawn(move || (w..d).step_by(workers).map(|k| (k, factor(k))).collect::<Vec<_>>())
                })
                .collect();
            for h in handles {
                for (k, r) in h.join().expect("hosvd worker panicked") {
                    slots[k] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every mode assigned")).collect::<Result<_>>()?
    };
    let mut core = t.clone();
    for (k, a) in factors.iter().enumerate() {
        core = core.mode_product(&a.transpose(), k + 1)?;
    }
    TuckerTensor::new(core, factors)
}

/// Random Tucker tensor with orthonormal factors, for tests and demos.
pub fn random_tucker(dims: &[usize], ranks: &[usize], seed: u64) -> Result<TuckerTensor> {
    use crate::kernels::{gaussian_matrix, householder_qr, SeededStream};
    if dims.len() != ranks.len() {
        return Err(Error::InvalidRanks("one rank per mode".into()));
    }
    let core_shape = Shape::new(ranks.to_vec())?;
    let g = gaussian_matrix(core_shape.numel(), 1, SeededStream::new(seed, 1 << 40));
    let core = DenseTensor::new(core_shape, g.into_vec())?;
    let factors = dims
        .iter()
        .zip(ranks)
        .enumerate()
        .map(|(k, (&n, &r))| {
            if r > n {
                return Err(Error::InvalidRanks(format!("rank {r} exceeds mode size {n}")));
            }
            Ok(householder_qr(&gaussian_matrix(n, r, SeededStream::new(seed, (1 << 40) + 1 + k as u64))).0)
        })
        .collect::<Result<_>>()?;
    TuckerTensor::new(core, factors)
}
