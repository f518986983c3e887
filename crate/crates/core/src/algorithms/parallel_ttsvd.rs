use crate::error::{Error, Result};
use crate::kernels::svd::{truncated_svd, Truncation, TruncatedSvd};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;
use crate::tt::{TtCore, TtTarget, TtTensor};

/// TT from independent truncated SVDs of all unfoldings; each drops a tail
/// of at most `tol·‖X‖_F/√(d−1)`. The SVDs run on up to `workers` threads.
pub fn parallel_ttsvd(t: &DenseTensor, target: &TtTarget, workers: usize) -> Result<TtTensor> {
    parallel_ttsvd_with_bases(t, target, workers).map(|(tt, _)| tt)
}

/// Like [`parallel_ttsvd`], also returning the left singular bases `U_k`.
pub fn parallel_ttsvd_with_bases(t: &DenseTensor, target: &TtTarget, workers: usize) -> Result<(TtTensor, Vec<Matrix>)> {
    let dims = t.dims().to_vec();
    let d = dims.len();
    target.validate(d)?;
    if d == 1 {
        return Ok((TtTensor::new(vec![TtCore::new(1, dims[0], 1, t.values().to_vec())?])?, Vec::new()));
    }
    let rule = |k: usize| match target {
        TtTarget::Tol(tol) => Truncation::Absolute(tol * t.frobenius_norm() / ((d - 1) as f64).sqrt()),
        TtTarget::Ranks(r) => Truncation::Rank(r[k - 1]),
    };
    let svd_of = |k: usize| -> Result<TruncatedSvd> { truncated_svd(&t.unfold(k)?, rule(k)) };

    let workers = workers.clamp(1, d - 1);
    let svds: Vec<TruncatedSvd> = if workers == 1 {
        (1..d).map(svd_of).collect::<Result<_>>()?
    } else {
        let mut slots: Vec<Option<Result<TruncatedSvd>>> = (1..d).map(|_| None).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let svd_of = &svd_of;
                    s.spawn(move || (1 + w..d).step_by(workers).map(|k| (k, svd_of(k))).collect::<Vec<_>>())
                })
                .collect();
            for h in handles {
                for (k, r) in h.join().expect("svd worker panicked") {
                    slots[k - 1] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every unfolding assigned")).collect::<Result<_>>()?
    };

    // a zero tail keeps one direction so the chain stays valid
    let bases: Vec<Matrix> = svds
        .iter()
        .zip(1..d)
        .map(|(s, k)| {
            if s.rank > 0 {
                s.u.clone()
            } else {
                let rows = dims[..k].iter().product();
                Matrix::from_fn(rows, 1, |i, _| if i == 0 { 1.0 } else { 0.0 })
            }
        })
        .collect();

    let mut cores = Vec::with_capacity(d);
    cores.push(TtCore::new(1, dims[0], bases[0].cols(), bases[0].as_slice().to_vec())?);
    for k in 1..d - 1 {
        let (prev, next) = (&bases[k - 1], &bases[k]);
        let wide = next.clone().reshape(prev.rows(), dims[k] * next.cols())?;
        let g = prev.tr_matmul(&wide)?;
        cores.push(TtCore::new(prev.cols(), dims[k], next.cols(), g.into_vec())?);
    }
    let last = &bases[d - 2];
    let tail = last.tr_matmul(&t.unfold(d - 1)?)?;
    if tail.cols() != dims[d - 1] {
        return Err(Error::ShapeMismatch("last unfolding width".into()));
    }
    cores.push(TtCore::new(last.cols(), dims[d - 1], 1, tail.into_vec())?);
    Ok((TtTensor::new(cores)?, bases))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{hilbert, random_tt};
    use crate::kernels::svd::singular_values;
    use crate::oracle::TensorOracle;
    use crate::tt::{tt_error, ErrorMode};

    #[test]
    fn exact_rank_recovery() {
        let x = random_tt(&[5, 6, 7], &[2, 2], 4).unwrap().full().unwrap();
        for workers in [1, 2] {
            let tt = parallel_ttsvd(&x, &TtTarget::Tol(1e-12), workers).unwrap();
            assert_eq!(tt.core_sizes(), vec![1, 2, 2, 1]);
            let e = tt_error(&x.as_oracle(), &tt, ErrorMode::Full).unwrap();
            assert!(e.relative_error <= 1e-12);
        }
    }

    #[test]
    fn hilbert_tolerance() {
        let x = hilbert(&[60, 60, 60]).unwrap().materialize().unwrap();
        let tt = parallel_ttsvd(&x, &TtTarget::Tol(1e-10), 2).unwrap();
        assert!(tt_error(&x.as_oracle(), &tt, ErrorMode::Full).unwrap().relative_error <= 1e-10);
    }

    #[test]
    fn error_below_projection_tails() {
        let x = DenseTensor::from_fn(crate::tensor::Shape::new(vec![6, 6, 6]).unwrap(), |i| {
            ((i[0] * 7 + i[1] * 3 + i[2] * 5) % 11) as f64 + (i[0] * i[1]) as f64 * 0.1
        });
        let ranks = [2, 3];
        let tt = parallel_ttsvd(&x, &TtTarget::Ranks(ranks.to_vec()), 1).unwrap();
        let bound: f64 = (1..3)
            .map(|k| singular_values(&x.unfold(k).unwrap())[ranks[k - 1]..].iter().map(|s| s * s).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let err = tt_error(&x.as_oracle(), &tt, ErrorMode::Full).unwrap().relative_error * x.frobenius_norm();
        assert!(err <= bound * (1.0 + 1e-10), "{err} > {bound}");
    }
}
