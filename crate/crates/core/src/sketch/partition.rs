//! Partition grids, sub-tensor references and owner maps.

use crate::error::{Error, Result};

/// `P_1..P_d` chunks per mode over dims `n_1..n_d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    dims: Vec<usize>,
    counts: Vec<usize>,
}

/// Bounds `[lo, hi)` of chunk `j` (0-based) when `n` is split into `p`
/// nearly equal chunks; the first `n mod p` chunks get one extra element.
pub fn chunk_bounds(n: usize, p: usize, j: usize) -> (usize, usize) {
    let q = n / p;
    let rem = n % p;
    let lo = j * q + j.min(rem);
    let len = q + usize::from(j < rem);
    (lo, lo + len)
}

impl Partition {
    pub fn new(dims: &[usize], counts: &[usize]) -> Result<Self> {
        if dims.len() != counts.len() {
            return Err(Error::InvalidPartition(format!(
                "{} chunk counts for {} modes",
                counts.len(),
                dims.len()
            )));
        }
        for (k, (&n, &p)) in dims.iter().zip(counts).enumerate() {
            if p == 0 || p > n {
                return Err(Error::InvalidPartition(format!(
                    "mode {} of size {n} cannot be split into {p} chunks",
                    k + 1
                )));
            }
        }
        Ok(Partition { dims: dims.to_vec(), counts: counts.to_vec() })
    }

    /// Up to 16 chunks on the first and last modes, none elsewhere.
    pub fn default_for(dims: &[usize]) -> Self {
        let d = dims.len();
        let mut counts = vec![1; d];
        counts[0] = dims[0].min(16);
        if d > 1 {
            counts[d - 1] = dims[d - 1].min(16);
        }
        Partition { dims: dims.to_vec(), counts }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `P = Π P_k`.
    pub fn num_blocks(&self) -> usize {
        self.counts.iter().product()
    }

    /// Sub-tensor with 0-based vectorized index `j` (first mode fastest).
    pub fn subtensor(&self, j: usize) -> SubTensorRef {
        let mut grid = Vec::with_capacity(self.counts.len());
        let mut rest = j;
        for &p in &self.counts {
            grid.push(rest % p);
            rest /= p;
        }
        let (lo, hi) = grid
            .iter()
            .zip(self.dims.iter().zip(&self.counts))
            .map(|(&g, (&n, &p))| chunk_bounds(n, p, g))
            .unzip();
        SubTensorRef { linear: j, grid, lo, hi }
    }

    /// Largest sub-tensor size in scalars.
    pub fn max_block_len(&self) -> usize {
        self.dims.iter().zip(&self.counts).map(|(&n, &p)| n.div_ceil(p)).product()
    }

    /// The same grid restricted to modes `range`.
    pub fn restrict(&self, range: std::ops::Range<usize>) -> Partition {
        Partition { dims: self.dims[range.clone()].to_vec(), counts: self.counts[range].to_vec() }
    }

    /// Vectorized index of a grid multi-index.
    pub fn linear(&self, grid: &[usize]) -> usize {
        grid.iter().zip(&self.counts).rev().fold(0, |acc, (&g, &p)| acc * p + g)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubTensorRef {
    /// 0-based vectorized index.
    pub linear: usize,
    /// 0-based grid multi-index.
    pub grid: Vec<usize>,
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl SubTensorRef {
    pub fn dims(&self) -> Vec<usize> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn len(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Contiguous, balanced assignment of `blocks` sub-sketch blocks to `workers`.
pub fn owner_map(blocks: usize, workers: usize) -> Vec<usize> {
    let workers = workers.max(1);
    let q = blocks / workers;
    let rem = blocks % workers;
    (0..workers).flat_map(|w| std::iter::repeat_n(w, q + usize::from(w < rem))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_chunks() {
        let b: Vec<_> = (0..3).map(|j| chunk_bounds(10, 3, j)).collect();
        assert_eq!(b, vec![(0, 4), (4, 7), (7, 10)]);
        assert_eq!(chunk_bounds(12, 3, 2), (8, 12));
    }

    #[test]
    fn subtensor_indexing() {
        let p = Partition::new(&[4, 4], &[2, 2]).unwrap();
        let s = p.subtensor(1);
        assert_eq!(s.grid, vec![1, 0]);
        assert_eq!((s.lo.clone(), s.hi.clone()), (vec![2, 0], vec![4, 2]));
        for j in 0..p.num_blocks() {
            assert_eq!(p.linear(&p.subtensor(j).grid), j);
        }
        let whole = Partition::new(&[3, 5, 2], &[1, 1, 1]).unwrap().subtensor(0);
        assert_eq!(whole.dims(), vec![3, 5, 2]);
        assert!(Partition::new(&[3], &[4]).is_err());
        assert!(Partition::new(&[3], &[0]).is_err());
    }

    #[test]
    fn owners() {
        assert_eq!(owner_map(4, 2), vec![0, 0, 1, 1]);
        let m = owner_map(2, 5);
        assert_eq!(m, vec![0, 1]);
        let m = owner_map(13, 4);
        let counts: Vec<usize> = (0..4).map(|w| m.iter().filter(|&&o| o == w).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        assert!(m.windows(2).all(|w| w[0] <= w[1]));
    }
}
