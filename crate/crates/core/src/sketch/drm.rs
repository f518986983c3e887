//! Khatri-Rao dimension reduction maps with addressable Gaussian factors.

use std::ops::Range;

use crate::kernels::random::{gaussian_matrix, gaussian_rows, SeededStream};
use crate::matrix::Matrix;
use crate::sketch::contract::kr_contract;

/// Stream kinds; the stream id of a factor is `kind << 48 | index << 24 | mode`.
pub const KIND_COLUMNS: u64 = 1;
pub const KIND_ROWS: u64 = 2;
pub const KIND_EXTRA: u64 = 3;

/// Stream mode slot of the single factor of a dense DRM.
const DENSE_SLOT: u64 = 0xFF_FFFF;

/// How the contracted modes are sketched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DrmKind {
    /// One small Gaussian factor per contracted mode.
    #[default]
    KhatriRao,
    /// One Gaussian factor over all contracted modes jointly, i.e. an
    /// unstructured `Π n_m × width` Gaussian map.
    Gaussian,
}

/// `Ψ_{m_last} ⊙ ⋯ ⊙ Ψ_{m_first}` over a contiguous range of modes, never
/// stored: each factor row slice is regenerated from its stream on demand.
/// With [`DrmKind::Gaussian`] the product has a single factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KhatriRaoDrm {
    seed: u64,
    kind: u64,
    index: usize,
    modes: Range<usize>,
    dims: Vec<usize>,
    width: usize,
    structure: DrmKind,
}

impl KhatriRaoDrm {
    /// `dims` are the full source dims and `modes` the 0-based contracted
    /// range. The width is clipped to the contracted dimension.
    pub fn new(seed: u64, kind: u64, index: usize, dims: &[usize], modes: Range<usize>, width: usize) -> Self {
        let contracted: usize = dims[modes.clone()].iter().product();
        KhatriRaoDrm {
            seed,
            kind,
            index,
            modes,
            dims: dims.to_vec(),
            width: width.min(contracted).max(1),
            structure: DrmKind::KhatriRao,
        }
    }

    pub fn with_structure(mut self, structure: DrmKind) -> Self {
        self.structure = structure;
        self
    }

    pub fn structure(&self) -> DrmKind {
        self.structure
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn modes(&self) -> Range<usize> {
        self.modes.clone()
    }

    pub fn stream(&self, mode: usize) -> SeededStream {
        let id = (self.kind << 48) | ((self.index as u64) << 24) | mode as u64;
        SeededStream::new(self.seed, id)
    }

    pub fn factor(&self, mode: usize) -> Matrix {
        gaussian_matrix(self.dims[mode], self.width, self.stream(mode))
    }

    /// Rows `lo..hi` of the factor for `mode`.
    pub fn factor_rows(&self, mode: usize, lo: usize, hi: usize) -> Matrix {
        gaussian_rows(self.dims[mode], self.width, lo, hi, self.stream(mode))
    }

    /// Factor slices for the box `lo..hi` (indexed by full source modes):
    /// one row slice per contracted mode, or for a dense DRM the rows of the
    /// box's contracted multi-indices, first mode fastest.
    pub fn factors_for(&self, lo: &[usize], hi: &[usize]) -> Vec<Matrix> {
        match self.structure {
            DrmKind::KhatriRao => self.modes.clone().map(|m| self.factor_rows(m, lo[m], hi[m])).collect(),
            DrmKind::Gaussian => vec![self.dense_rows(lo, hi)],
        }
    }

    /// `block` (dims `bdims`) contracted over `contracted` with factors from
    /// [`Self::factors_for`]; returns the `kept × width` matrix.
    pub fn contract(&self, block: &[f64], bdims: &[usize], contracted: Range<usize>, factors: &[Matrix]) -> Matrix {
        match self.structure {
            DrmKind::KhatriRao => kr_contract(block, bdims, contracted, factors),
            DrmKind::Gaussian => {
                // merge the contracted modes into one; the flat data is unchanged
                let joint: usize = bdims[contracted.clone()].iter().product();
                let merged: Vec<usize> = bdims[..contracted.start]
                    .iter()
                    .copied()
                    .chain(std::iter::once(joint))
                    .chain(bdims[contracted.end..].iter().copied())
                    .collect();
                kr_contract(block, &merged, contracted.start..contracted.start + 1, factors)
            }
        }
    }

    fn dense_rows(&self, lo: &[usize], hi: &[usize]) -> Matrix {
        let modes = self.modes.clone();
        let total: usize = self.dims[modes.clone()].iter().product();
        let boxed: Vec<usize> = modes.clone().map(|m| hi[m] - lo[m]).collect();
        let len: usize = boxed.iter().product();
        let run = boxed[0];
        let stream = SeededStream::new(self.seed, (self.kind << 48) | ((self.index as u64) << 24) | DENSE_SLOT);
        let mut out = Matrix::zeros(len, self.width);
        // runs along the first contracted mode are contiguous in the stream
        let mut outer = vec![0usize; boxed.len()];
        for start in (0..len).step_by(run) {
            let mut global = 0;
            let mut stride = 1;
            for (k, m) in modes.clone().enumerate() {
                global += (lo[m] + outer[k]) * stride;
                stride *= self.dims[m];
            }
            for c in 0..self.width {
                stream.fill((global + total * c) as u64, &mut out.column_mut(c)[start..start + run]);
            }
            for k in 1..boxed.len() {
                outer[k] += 1;
                if outer[k] < boxed[k] {
                    break;
                }
                outer[k] = 0;
            }
        }
        out
    }

    /// The explicit `Π n_m × width` matrix, first contracted mode fastest.
    /// Only meant for verification at small sizes.
    pub fn dense(&self) -> Matrix {
        if self.structure == DrmKind::Gaussian {
            let lo = vec![0; self.dims.len()];
            return self.dense_rows(&lo, &self.dims);
        }
        let factors: Vec<Matrix> = self.modes.clone().map(|m| self.factor(m)).collect();
        let rows: usize = self.dims[self.modes.clone()].iter().product();
        let mut out = Matrix::zeros(rows, self.width);
        let mut idx = vec![0usize; factors.len()];
        for r in 0..rows {
            for c in 0..self.width {
                out[(r, c)] = factors.iter().zip(&idx).map(|(f, &i)| f[(i, c)]).product();
            }
            for (k, f) in factors.iter().enumerate() {
                idx[k] += 1;
                if idx[k] < f.rows() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}
