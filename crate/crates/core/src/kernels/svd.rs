//! Truncated SVD (via nalgebra) and SVD-based least squares.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How to cut a factorization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// Keep exactly this many terms (clipped to the available ones).
    Rank(usize),
    /// Smallest rank with tail ≤ `tol · ‖A‖_F`, `0 < tol < 1`.
    Tol(f64),
    /// Smallest rank with tail ≤ the given absolute value.
    Absolute(f64),
}

impl Truncation {
    pub fn validate(self) -> Result<Self> {
        match self {
            Truncation::Tol(t) if !(t > 0.0 && t < 1.0) => Err(Error::InvalidTolerance(t)),
            Truncation::Absolute(t) if t.is_nan() || t < 0.0 => Err(Error::InvalidTolerance(t)),
            Truncation::Rank(0) => Err(Error::InvalidRanks("rank must be at least 1".into())),
            other => Ok(other),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
    pub rank: usize,
    /// All singular values of the input, nonincreasing.
    pub full_spectrum: Vec<f64>,
}

impl TruncatedSvd {
    /// `‖A − UΣVᵀ‖_F` implied by the discarded singular values.
    pub fn tail(&self) -> f64 {
        tail_norm(&self.full_spectrum, self.rank)
    }

    /// `ΣVᵀ` as a `rank × cols` matrix.
    pub fn sigma_vt(&self) -> Matrix {
        let mut m = self.v.transpose();
        for j in 0..m.cols() {
            for (i, s) in self.singular_values.iter().enumerate() {
                m[(i, j)] *= s;
            }
        }
        m
    }
}

/// `sqrt(Σ_{k ≥ rank} σ_k²)`.
pub fn tail_norm(sigma: &[f64], rank: usize) -> f64 {
    crate::matrix::norm2(&sigma[rank.min(sigma.len())..])
}

/// Full thin SVD with singular values sorted nonincreasing.
pub(crate) fn thin_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (m, n) = (a.rows(), a.cols());
    let k = m.min(n);
    if k == 0 {
        return (Matrix::zeros(m, 0), Vec::new(), Matrix::zeros(n, 0));
    }
    let dm = DMatrix::from_column_slice(m, n, a.as_slice());
    let svd = dm.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let u = Matrix::from_col_major(m, k, u.as_slice().to_vec()).expect("svd u shape");
    let v = Matrix::from_col_major(k, n, vt.as_slice().to_vec()).expect("svd vt shape").transpose();
    (u, sigma, v)
}

/// Rank chosen by a truncation rule from a nonincreasing spectrum.
pub(crate) fn choose_rank(sigma: &[f64], rule: Truncation) -> usize {
    match rule {
        Truncation::Rank(r) => r.min(sigma.len()),
        Truncation::Tol(t) => {
            let total = crate::matrix::norm2(sigma);
            choose_rank(sigma, Truncation::Absolute(t * total))
        }
        Truncation::Absolute(bound) => {
            // smallest r with sqrt(Σ_{k≥r} σ_k²) ≤ bound
            let mut tail2 = 0.0;
            let mut r = sigma.len();
            while r > 0 {
                let next = tail2 + sigma[r - 1] * sigma[r - 1];
                if next.sqrt() > bound {
                    break;
                }
                tail2 = next;
                r -= 1;
            }
            r
        }
    }
}

pub fn truncated_svd(a: &Matrix, rule: Truncation) -> Result<TruncatedSvd> {
    let rule = rule.validate()?;
    let (u, sigma, v) = thin_svd(a);
    let rank = choose_rank(&sigma, rule);
    Ok(TruncatedSvd {
        u: u.leading_columns(rank),
        singular_values: sigma[..rank].to_vec(),
        v: v.leading_columns(rank),
        rank,
        full_spectrum: sigma,
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.rows().min(a.cols()) == 0 {
        return Vec::new();
    }
    let dm = DMatrix::from_column_slice(a.rows(), a.cols(), a.as_slice());
    let mut s: Vec<f64> = dm.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rel_tol · σ_1`.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&x| x > rel_tol * s1).count(),
        _ => 0,
    }
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: Matrix,
    pub rank: usize,
    /// `σ_1 / σ_min` over the columns of `A` (infinite if rank deficient).
    pub condition: f64,
}

/// `argmin_X ‖A X − B‖_F` through the SVD of `A`, dropping singular values
/// below `max(rows, cols) · ε · σ_1`.
pub fn pseudo_inverse_apply(a: &Matrix, b: &Matrix) -> Result<LeastSquares> {
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "least squares with A {}x{} and B {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (u, sigma, v) = thin_svd(a);
    let cut = a.rows().max(a.cols()) as f64 * f64::EPSILON * sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().take_while(|&&s| s > cut).count();
    let condition = if rank == a.cols() && rank > 0 {
        sigma[0] / sigma[rank - 1]
    } else {
        f64::INFINITY
    };
    let u = u.leading_columns(rank);
    let mut utb = u.tr_matmul(b)?;
    for j in 0..utb.cols() {
        for (i, s) in sigma[..rank].iter().enumerate() {
            utb[(i, j)] /= s;
        }
    }
    let x = v.leading_columns(rank).matmul(&utb)?;
    Ok(LeastSquares { x, rank, condition })
}
