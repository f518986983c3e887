//! Householder QR, column-pivoted QR and tree (TSQR) reduction.

use crate::error::{Error, Result};
use crate::kernels::svd::Truncation;
use crate::matrix::{norm2, Matrix};

/// Householder factorization stored LAPACK-style: reflector `j` lives below
/// the diagonal of column `j` with an implicit unit head.
struct Householder {
    a: Matrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

fn factor(mut a: Matrix, pivot: bool) -> Householder {
    let (m, n) = (a.rows(), a.cols());
    let k = m.min(n);
    let mut tau = vec![0.0; k];
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| norm2(a.column(j))).collect();
    let mut ref_norms = norms.clone();
    for j in 0..k {
        if pivot {
            let p = (j..n).fold(j, |best, c| if norms[c] > norms[best] { c } else { best });
            if p != j {
                for i in 0..m {
                    let t = a[(i, j)];
                    a[(i, j)] = a[(i, p)];
                    a[(i, p)] = t;
                }
                perm.swap(j, p);
                norms.swap(j, p);
                ref_norms.swap(j, p);
            }
        }
        // reflector for a[j.., j]
        let alpha = a[(j, j)];
        let xnorm = norm2(&a.column(j)[j + 1..]);
        if xnorm == 0.0 {
            tau[j] = 0.0;
        } else {
            let beta = -alpha.signum() * (alpha.hypot(xnorm));
            let beta = if alpha == 0.0 { -(alpha.hypot(xnorm)) } else { beta };
            tau[j] = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            for v in &mut a.column_mut(j)[j + 1..] {
                *v *= scale;
            }
            a[(j, j)] = beta;
        }
        // apply H_j = I − τ v vᵀ to the trailing columns
        if tau[j] != 0.0 {
            for c in j + 1..n {
                let (vcol, ccol) = two_columns(&mut a, j, c);
                let mut dot = ccol[j];
                for i in j + 1..m {
                    dot += vcol[i] * ccol[i];
                }
                let s = tau[j] * dot;
                ccol[j] -= s;
                for i in j + 1..m {
                    ccol[i] -= s * vcol[i];
                }
            }
        }
        if pivot {
            for c in j + 1..n {
                if norms[c] == 0.0 {
                    continue;
                }
                let r = a[(j, c)].abs() / norms[c];
                let t = (1.0 - r * r).max(0.0);
                let ratio = norms[c] / ref_norms[c];
                if t * ratio * ratio <= f64::EPSILON.sqrt() {
                    // downdating lost accuracy; recompute
                    norms[c] = norm2(&a.column(c)[j + 1..]);
                    ref_norms[c] = norms[c];
                } else {
                    norms[c] *= t.sqrt();
                }
            }
        }
    }
    Householder { a, tau, perm }
}

fn two_columns(a: &mut Matrix, j: usize, c: usize) -> (&[f64], &mut [f64]) {
    debug_assert!(j < c);
    let rows = a.rows();
    let (lo, hi) = a.as_mut_slice().split_at_mut(c * rows);
    (&lo[j * rows..(j + 1) * rows], &mut hi[..rows])
}

impl Householder {
    /// First `cols` columns of Q.
    fn q(&self, cols: usize) -> Matrix {
        let m = self.a.rows();
        let k = self.tau.len();
        let mut q = Matrix::zeros(m, cols);
        for j in 0..cols.min(m) {
            q[(j, j)] = 1.0;
        }
        for j in (0..k).rev() {
            if self.tau[j] == 0.0 {
                continue;
            }
            let v = self.a.column(j);
            for c in 0..cols {
                let col = q.column_mut(c);
                let mut dot = col[j];
                for i in j + 1..m {
                    dot += v[i] * col[i];
                }
                let s = self.tau[j] * dot;
                col[j] -= s;
                for i in j + 1..m {
                    col[i] -= s * v[i];
                }
            }
        }
        q
    }

    /// Leading `rows` rows of R.
    fn r(&self, rows: usize) -> Matrix {
        Matrix::from_fn(rows, self.a.cols(), |i, j| if i <= j { self.a[(i, j)] } else { 0.0 })
    }
}

/// Thin QR: `A = Q R` with `Q` of size `m × min(m,n)`.
pub fn householder_qr(a: &Matrix) -> (Matrix, Matrix) {
    let k = a.rows().min(a.cols());
    let h = factor(a.clone(), false);
    (h.q(k), h.r(k))
}

#[derive(Clone, Debug)]
pub struct CpqrFactor {
    /// `m × rank`, orthonormal columns.
    pub q: Matrix,
    /// `rank × n`, upper trapezoidal, columns in pivoted order.
    pub r: Matrix,
    /// Column `j` of `A·Π` is column `perm[j]` of `A`.
    pub perm: Vec<usize>,
    pub rank: usize,
    /// `|R_jj|` for every step of the full factorization.
    pub diag: Vec<f64>,
}

/// Businger–Golub column-pivoted QR, truncated by rank or by the relative
/// diagonal rule `|R_{k+1,k+1}| ≤ tol·|R_11|`.
pub fn cpqr_truncated(a: &Matrix, rule: Truncation) -> Result<CpqrFactor> {
    let rule = rule.validate()?;
    let h = factor(a.clone(), true);
    let k = h.tau.len();
    let diag: Vec<f64> = (0..k).map(|j| h.a[(j, j)].abs()).collect();
    let rank = match rule {
        Truncation::Rank(r) => r.min(k),
        Truncation::Tol(t) => {
            let r11 = diag.first().copied().unwrap_or(0.0);
            diag.iter().position(|&x| x <= t * r11).unwrap_or(k)
        }
        Truncation::Absolute(t) => diag.iter().position(|&x| x <= t).unwrap_or(k),
    };
    Ok(CpqrFactor { q: h.q(rank), r: h.r(rank), perm: h.perm, rank, diag })
}

/// Result of [`tree_qr`]: per-block Q pieces and the shared R.
#[derive(Clone, Debug)]
pub struct TreeQr {
    pub q_blocks: Vec<Matrix>,
    pub r: Matrix,
}

impl TreeQr {
    pub fn stacked_q(&self) -> Matrix {
        let refs: Vec<&Matrix> = self.q_blocks.iter().collect();
        Matrix::vcat(&refs).expect("blocks share width")
    }
}

/// QR of the vertical stack of `blocks` through a fixed balanced binary
/// reduction over block order.
pub fn tree_qr(blocks: &[Matrix]) -> Result<TreeQr> {
    let c = blocks.first().map(|b| b.cols()).ok_or_else(|| {
        Error::InvalidArgument("tree QR needs at least one block".into())
    })?;
    if blocks.iter().any(|b| b.cols() != c) {
        return Err(Error::ShapeMismatch("tree QR blocks differ in width".into()));
    }
    let total: usize = blocks.iter().map(|b| b.rows()).sum();
    if total < c {
        return Err(Error::ShapeMismatch(format!("tree QR of {total} rows and {c} columns")));
    }
    let (q_blocks, r) = reduce(blocks);
    Ok(TreeQr { q_blocks, r })
}

fn reduce(blocks: &[Matrix]) -> (Vec<Matrix>, Matrix) {
    if blocks.len() == 1 {
        let (q, r) = householder_qr(&blocks[0]);
        return (vec![q], r);
    }
    let mid = blocks.len().div_ceil(2);
    let (mut ql, rl) = reduce(&blocks[..mid]);
    let (mut qr, rr) = reduce(&blocks[mid..]);
    let stacked = Matrix::vcat(&[&rl, &rr]).expect("same width");
    let (qhat, r) = householder_qr(&stacked);
    let top = qhat.row_range(0, rl.rows());
    let bot = qhat.row_range(rl.rows(), stacked.rows());
    for q in &mut ql {
        *q = q.matmul(&top).expect("conformal");
    }
    for q in &mut qr {
        *q = q.matmul(&bot).expect("conformal");
    }
    ql.extend(qr);
    (ql, r)
}
