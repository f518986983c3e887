//! Test tensors: Hilbert, Gaussian bumps and random TT.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::random::SeededStream;
use crate::oracle::{EvalCounter, TensorOracle};
use crate::tensor::Shape;
use crate::tt::{TtCore, TtTensor};

/// `X(i_1..i_d) = 1 / (1 − d + i_1 + ⋯ + i_d)` with 1-based indices.
pub struct Hilbert {
    shape: Shape,
    counter: EvalCounter,
}

pub fn hilbert(dims: &[usize]) -> Result<Hilbert> {
    Ok(Hilbert { shape: Shape::new(dims.to_vec())?, counter: EvalCounter::default() })
}

impl TensorOracle for Hilbert {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn value(&self, idx: &[usize]) -> f64 {
        // with 0-based indices the denominator is 1 + Σ i_k
        1.0 / (1 + idx.iter().sum::<usize>()) as f64
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }
}

/// Sum of `N` isotropic Gaussians on the grid `x_j = 2 i_j / n_j − 1`.
pub struct GaussianBumps {
    shape: Shape,
    centers: Vec<[f64; 3]>,
    gamma: f64,
    counter: EvalCounter,
}

/// Centers drawn uniformly from `[−1, 1]³`.
pub fn gaussian_bumps(dims: &[usize], n: usize, gamma: f64, seed: u64) -> Result<GaussianBumps> {
    let mut rng = SeededStream::new(seed, 0xB0B5).uniform_rng();
    let centers = (0..n)
        .map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0)))
        .collect();
    GaussianBumps::with_centers(dims, centers, gamma)
}

impl GaussianBumps {
    pub fn with_centers(dims: &[usize], centers: Vec<[f64; 3]>, gamma: f64) -> Result<Self> {
        if dims.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "Gaussian bumps are defined for order 3, got {}",
                dims.len()
            )));
        }
        Ok(GaussianBumps { shape: Shape::new(dims.to_vec())?, centers, gamma, counter: EvalCounter::default() })
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }
}

impl TensorOracle for GaussianBumps {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn value(&self, idx: &[usize]) -> f64 {
        let dims = self.shape.dims();
        let x: [f64; 3] = std::array::from_fn(|j| 2.0 * (idx[j] + 1) as f64 / dims[j] as f64 - 1.0);
        self.centers
            .iter()
            .map(|c| {
                let r2: f64 = (0..3).map(|j| (x[j] - c[j]) * (x[j] - c[j])).sum();
                (-self.gamma * r2).exp()
            })
            .sum()
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }
}

/// TT tensor with i.i.d. uniform `(0, 1)` core entries.
pub fn random_tt(dims: &[usize], ranks: &[usize], seed: u64) -> Result<TtTensor> {
    if ranks.len() + 1 != dims.len() {
        return Err(Error::InvalidRanks(format!(
            "{} modes need {} ranks, got {}",
            dims.len(),
            dims.len() - 1,
            ranks.len()
        )));
    }
    if ranks.contains(&0) || dims.contains(&0) {
        return Err(Error::InvalidRanks("ranks and dims must be positive".into()));
    }
    let sizes: Vec<usize> = std::iter::once(1).chain(ranks.iter().copied()).chain(std::iter::once(1)).collect();
    let cores = dims
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mut rng = SeededStream::new(seed, 0x77_0000 + k as u64).uniform_rng();
            let len = sizes[k] * n * sizes[k + 1];
            // open interval: reject exact zeros
            let data = (0..len)
                .map(|_| loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                })
                .collect();
            TtCore::new(sizes[k], n, sizes[k + 1], data)
        })
        .collect::<Result<_>>()?;
    TtTensor::new(cores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::{ttsvd, TtTarget};

    #[test]
    fn hilbert_entries() {
        let h = hilbert(&[4, 4, 4]).unwrap();
        assert_eq!(h.entry(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(h.entry(&[2, 3, 4]).unwrap(), 1.0 / 7.0);
        let h5 = hilbert(&[2; 5]).unwrap();
        assert_eq!(h5.entry(&[1; 5]).unwrap(), 1.0);
        assert_eq!(h.eval_count(), 2);
    }

    #[test]
    fn bumps() {
        let b = GaussianBumps::with_centers(&[4, 6, 8], vec![[0.0; 3]], 10.0).unwrap();
        assert!((b.entry(&[2, 3, 4]).unwrap() - 1.0).abs() < 1e-15);
        let empty = gaussian_bumps(&[3, 3, 3], 0, 10.0, 1).unwrap();
        assert!(empty.materialize().unwrap().values().iter().all(|&v| v == 0.0));
        assert!(gaussian_bumps(&[3, 3], 1, 1.0, 1).is_err());
        let a = gaussian_bumps(&[5, 5, 5], 100, 10.0, 9).unwrap();
        let b = gaussian_bumps(&[5, 5, 5], 100, 10.0, 9).unwrap();
        assert_eq!(a.centers(), b.centers());
        assert!(a.centers().iter().flatten().all(|c| (-1.0..1.0).contains(c)));
    }

    #[test]
    fn random_tt_properties() {
        let a = random_tt(&[3, 4, 5], &[1, 1], 4).unwrap();
        assert_eq!(a.core_sizes(), vec![1, 1, 1, 1]);
        let b = random_tt(&[5, 6, 7], &[2, 3], 8).unwrap();
        assert_eq!(b, random_tt(&[5, 6, 7], &[2, 3], 8).unwrap());
        let rec = ttsvd(&b.full().unwrap(), &TtTarget::Tol(1e-12)).unwrap();
        assert!(rec.core_sizes().iter().zip(b.core_sizes()).all(|(x, y)| *x <= y));
        assert!(b.cores().iter().flat_map(|c| c.data()).all(|&v| v > 0.0 && v < 1.0));
        assert!(random_tt(&[3, 3], &[1, 1], 0).is_err());
    }
}
