use crate::error::{Error, Result};
use crate::kernels::qr::householder_qr;
use crate::kernels::svd::{truncated_svd, Truncation};
use crate::matrix::Matrix;
use crate::sylvester::{NormalOperator, ShiftParameters};

/// `W · D · Yᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRank {
    pub w: Matrix,
    pub d: Matrix,
    pub y: Matrix,
}

impl LowRank {
    pub fn rank(&self) -> usize {
        self.d.cols()
    }

    pub fn to_dense(&self) -> Result<Matrix> {
        self.w.matmul(&self.d)?.matmul_tr(&self.y)
    }

    /// Appends a block `W_b · (δ I) · Y_bᵀ`.
    pub fn append(&mut self, w: &Matrix, delta: f64, y: &Matrix) -> Result<()> {
        let (k, b) = (self.d.cols(), w.cols());
        if y.cols() != b {
            return Err(Error::ShapeMismatch("appended factors differ in width".into()));
        }
        let mut d = Matrix::zeros(k + b, k + b);
        for j in 0..k {
            for i in 0..k {
                d[(i, j)] = self.d[(i, j)];
            }
        }
        for j in 0..b {
            d[(k + j, k + j)] = delta;
        }
        self.w = Matrix::hcat(&[&self.w, w])?;
        self.y = Matrix::hcat(&[&self.y, y])?;
        self.d = d;
        Ok(())
    }

    /// Scalars held by the three factors.
    pub fn len(&self) -> usize {
        self.w.len() + self.d.len() + self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Low-rank factors of the solution of `A X − X Bᵀ = U Vᵀ` after one fADI
/// step per shift pair; `A` solves use the poles `q`, `B` solves the zeros `p`.
pub fn fadi_matrix(
    a: &NormalOperator,
    b: &NormalOperator,
    u: &Matrix,
    v: &Matrix,
    shifts: &ShiftParameters,
) -> Result<LowRank> {
    if u.cols() != v.cols() || u.rows() != a.dim() || v.rows() != b.dim() {
        return Err(Error::ShapeMismatch("right-hand side factors do not match the operators".into()));
    }
    if shifts.is_empty() {
        return Err(Error::InvalidArgument("no shifts".into()));
    }
    let (p, q) = (&shifts.p, &shifts.q);
    let mut zj = a.shifted_solve(q[0], u)?;
    let mut yj = b.shifted_solve(p[0], v)?;
    let mut out = LowRank { w: zj.clone(), d: Matrix::identity(u.cols()).scaled(q[0] - p[0]), y: yj.clone() };
    for j in 0..shifts.len() - 1 {
        zj = zj.add(&a.shifted_solve(q[j + 1], &zj.scaled(q[j + 1] - p[j]))?)?;
        yj = yj.add(&b.shifted_solve(p[j + 1], &yj.scaled(p[j + 1] - q[j]))?)?;
        out.append(&zj, q[j + 1] - p[j + 1], &yj)?;
    }
    Ok(out)
}

/// Recompresses `W D Yᵀ` through QRs of the outer factors and an SVD of the
/// small middle, dropping a tail of at most `eps·‖W D Yᵀ‖_F`. Keeps at least
/// one (possibly zero) term.
pub fn lowrank_recompress(lr: &LowRank, eps: f64) -> Result<LowRank> {
    if lr.w.cols() != lr.d.rows() || lr.d.cols() != lr.y.cols() {
        return Err(Error::ShapeMismatch("factors are not conformal".into()));
    }
    let (qw, rw) = householder_qr(&lr.w);
    let (qy, ry) = householder_qr(&lr.y);
    let core = rw.matmul(&lr.d)?.matmul_tr(&ry)?;
    let top = crate::kernels::svd::singular_values(&core).first().copied().unwrap_or(0.0);
    let rule = if eps > 0.0 {
        Truncation::Tol(eps.min(0.5))
    } else {
        Truncation::Absolute(top * f64::EPSILON * core.rows().max(core.cols()) as f64)
    };
    let svd = truncated_svd(&core, rule)?;
    let keep = svd.rank.max(1);
    let (us, vs) = if svd.rank == 0 {
        (Matrix::from_fn(core.rows(), 1, |i, _| if i == 0 { 1.0 } else { 0.0 }), Matrix::from_fn(core.cols(), 1, |i, _| if i == 0 { 1.0 } else { 0.0 }))
    } else {
        (svd.u, svd.v)
    };
    let sigma: Vec<f64> = (0..keep).map(|i| svd.singular_values.get(i).copied().unwrap_or(0.0)).collect();
    Ok(LowRank { w: qw.matmul(&us)?, d: Matrix::from_diagonal(&sigma), y: qy.matmul(&vs)? })
}

/// Appends `W_b (δ I) Y_bᵀ` to a factorization whose `W` and `Y` have
/// orthonormal columns (or are empty) and recompresses at relative `eps`.
/// Only the new block is orthogonalized, and `W` is rotated in place, so no
/// second copy of the tall factor is made. Returns the scalar operation count.
pub fn append_recompressed(lr: &mut LowRank, w: &Matrix, delta: f64, y: &Matrix, eps: f64) -> Result<u64> {
    if w.cols() != y.cols() || w.rows() != lr.w.rows() || y.rows() != lr.y.rows() {
        return Err(Error::ShapeMismatch("appended factors do not match".into()));
    }
    let (k, r) = (lr.d.cols(), w.cols());
    let (m, n) = (w.rows() as u64, y.rows() as u64);
    let (qw, rw) = extend_basis(&lr.w, w)?;
    let (qy, ry) = extend_basis(&lr.y, y)?;
    let mut mid = Matrix::zeros(k + r, k + r);
    for j in 0..k {
        for i in 0..k {
            mid[(i, j)] = lr.d[(i, j)];
        }
    }
    for j in 0..r {
        mid[(k + j, k + j)] = delta;
    }
    let core = rw.matmul(&mid)?.matmul_tr(&ry)?;
    let svd = truncated_svd(&core, Truncation::Tol(eps.clamp(f64::MIN_POSITIVE, 0.5)))?;
    let keep = svd.rank.max(1);
    let rot_w = svd.u.leading_columns(svd.rank);
    let rot_w = if svd.rank == 0 { unit_column(k + r) } else { rot_w };
    let rot_y = if svd.rank == 0 { unit_column(k + r) } else { svd.v.clone() };
    let sigma: Vec<f64> = (0..keep).map(|i| svd.singular_values.get(i).copied().unwrap_or(0.0)).collect();

    let old = std::mem::replace(&mut lr.w, Matrix::zeros(0, 0));
    lr.w = rotate_in_place(old, &qw, &rot_w)?;
    lr.y = Matrix::hcat(&[&lr.y, &qy])?.matmul(&rot_y)?;
    lr.d = Matrix::from_diagonal(&sigma);
    let (k, r, s) = (k as u64, r as u64, keep as u64);
    Ok((m + n) * (8 * k * r + 2 * r * r) + (m + n) * (k + r) * s * 2 + 20 * (k + r).pow(3))
}

fn unit_column(rows: usize) -> Matrix {
    Matrix::from_fn(rows, 1, |i, _| if i == 0 { 1.0 } else { 0.0 })
}

/// Orthonormal completion of `[Q, B]` for `Q` with orthonormal columns:
/// returns the new columns and the `(k+r) × (k+r)` triangular factor.
fn extend_basis(q: &Matrix, b: &Matrix) -> Result<(Matrix, Matrix)> {
    let (k, r) = (q.cols(), b.cols());
    let mut coef = Matrix::zeros(k, r);
    let mut rest = b.clone();
    if k > 0 {
        // two rounds of classical Gram–Schmidt
        for _ in 0..2 {
            let c = q.tr_matmul(&rest)?;
            rest = rest.sub(&q.matmul(&c)?)?;
            coef.add_assign(&c)?;
        }
    }
    let (qn, rn) = householder_qr(&rest);
    let rn = if rn.rows() < r {
        // fewer rows than new columns: pad to a square factor
        Matrix::vcat(&[&rn, &Matrix::zeros(r - rn.rows(), r)])?
    } else {
        rn
    };
    let qn = if qn.cols() < r { Matrix::hcat(&[&qn, &Matrix::zeros(qn.rows(), r - qn.cols())])? } else { qn };
    let mut full = Matrix::zeros(k + r, k + r);
    for j in 0..k {
        full[(j, j)] = 1.0;
    }
    for j in 0..r {
        for i in 0..k {
            full[(i, k + j)] = coef[(i, j)];
        }
        for i in 0..r {
            full[(k + i, k + j)] = rn[(i, j)];
        }
    }
    Ok((qn, full))
}

/// `[W, N] · R` computed row block by row block inside `W`'s own storage.
fn rotate_in_place(w: Matrix, new: &Matrix, rot: &Matrix) -> Result<Matrix> {
    const BLOCK: usize = 256;
    let rows = new.rows();
    let (k, s) = (rot.rows(), rot.cols());
    let mut data = w.into_vec();
    data.extend_from_slice(new.as_slice());
    let mut tile = Matrix::zeros(BLOCK.min(rows.max(1)), k);
    let mut lo = 0;
    while lo < rows {
        let hi = (lo + BLOCK).min(rows);
        let h = hi - lo;
        if tile.rows() != h {
            tile = Matrix::zeros(h, k);
        }
        for c in 0..k {
            tile.column_mut(c).copy_from_slice(&data[lo + rows * c..hi + rows * c]);
        }
        let out = tile.matmul(rot)?;
        for c in 0..s {
            data[lo + rows * c..hi + rows * c].copy_from_slice(out.column(c));
        }
        lo = hi;
    }
    data.truncate(rows * s);
    data.shrink_to_fit();
    Matrix::from_col_major(rows, s, data)
}

/// Approximate scalar operations of [`lowrank_recompress`].
pub fn recompress_cost(lr: &LowRank) -> u64 {
    let k = lr.d.cols() as u64;
    let (m, n) = (lr.w.rows() as u64, lr.y.rows() as u64);
    4 * (m + n) * k * k + 20 * k * k * k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::random::{gaussian_matrix, SeededStream};
    use crate::sylvester::{zolotarev_shifts, zolotarev_shifts_with_count, Interval};

    fn elementwise(a: &[f64], b: &[f64], f: &Matrix) -> Matrix {
        Matrix::from_fn(a.len(), b.len(), |i, j| f[(i, j)] / (a[i] - b[j]))
    }

    #[test]
    fn two_by_two_matches_elementwise() {
        let a = NormalOperator::diagonal(vec![-1.0, -2.0]).unwrap();
        let b = NormalOperator::diagonal(vec![1.0, 2.0]).unwrap();
        let u = Matrix::from_col_major(2, 1, vec![1.0, -3.0]).unwrap();
        let v = Matrix::from_col_major(2, 1, vec![0.5, 2.0]).unwrap();
        let s = zolotarev_shifts(a.interval(), b.interval(), 1e-12).unwrap();
        let x = fadi_matrix(&a, &b, &u, &v, &s).unwrap();
        assert!(x.rank() <= s.len());
        let want = elementwise(a.eigenvalues(), b.eigenvalues(), &u.matmul_tr(&v).unwrap());
        assert!(x.to_dense().unwrap().sub(&want).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn scalar_error_is_the_rational_ratio() {
        let a = NormalOperator::diagonal(vec![-0.7]).unwrap();
        let b = NormalOperator::diagonal(vec![1.3]).unwrap();
        let one = Matrix::identity(1);
        let e = Interval::new(-1.0, -0.1).unwrap();
        let f = Interval::new(0.2, 3.0).unwrap();
        for l in 1..4 {
            let s = zolotarev_shifts_with_count(e, f, l).unwrap();
            let x = fadi_matrix(&a, &b, &one, &one, &s).unwrap().to_dense().unwrap()[(0, 0)];
            let exact = 1.0 / (-0.7 - 1.3);
            let r: f64 = s.p.iter().zip(&s.q).map(|(p, q)| (-0.7 - p) / (-0.7 - q) * (1.3 - q) / (1.3 - p)).product();
            assert!(((exact - x) / exact - r).abs() < 1e-13);
        }
    }

    #[test]
    fn one_shift_error_within_grid_bound() {
        let av: Vec<f64> = (0..20).map(|i| -2.0 + 1.9 * i as f64 / 19.0).collect();
        let bv: Vec<f64> = av.iter().map(|x| -x).collect();
        let a = NormalOperator::diagonal(av.clone()).unwrap();
        let b = NormalOperator::diagonal(bv.clone()).unwrap();
        let u = gaussian_matrix(20, 2, SeededStream::new(1, 0));
        let v = gaussian_matrix(20, 2, SeededStream::new(2, 0));
        let s = zolotarev_shifts_with_count(a.interval(), b.interval(), 1).unwrap();
        let want = elementwise(&av, &bv, &u.matmul_tr(&v).unwrap());
        let err = fadi_matrix(&a, &b, &u, &v, &s).unwrap().to_dense().unwrap().sub(&want).unwrap().frobenius_norm();
        assert!(err / want.frobenius_norm() <= s.grid_ratio(400));
    }

    #[test]
    fn recompression() {
        // rank 2 stored in 6 columns
        let base_w = gaussian_matrix(30, 2, SeededStream::new(3, 0));
        let base_y = gaussian_matrix(25, 2, SeededStream::new(4, 0));
        let mix = gaussian_matrix(2, 6, SeededStream::new(5, 0));
        let lr = LowRank {
            w: base_w.matmul(&mix).unwrap(),
            d: Matrix::from_diagonal(&[1.0, 2.0, 0.5, 3.0, 1.0, 0.1]),
            y: base_y.matmul(&gaussian_matrix(2, 6, SeededStream::new(6, 0))).unwrap(),
        };
        let full = lr.to_dense().unwrap();
        let c = lowrank_recompress(&lr, 1e-12).unwrap();
        assert_eq!(c.rank(), 2);
        assert!(c.w.orthonormality_defect() < 1e-12 && c.y.orthonormality_defect() < 1e-12);
        assert!(c.to_dense().unwrap().sub(&full).unwrap().frobenius_norm() <= 1e-12 * full.frobenius_norm());
        assert_eq!(lowrank_recompress(&lr, 0.0).unwrap().rank(), 2);

        let noisy = LowRank {
            w: gaussian_matrix(40, 12, SeededStream::new(7, 0)),
            d: Matrix::from_diagonal(&(0..12).map(|i| 10f64.powi(-i)).collect::<Vec<_>>()),
            y: gaussian_matrix(35, 12, SeededStream::new(8, 0)),
        };
        let full = noisy.to_dense().unwrap();
        for eps in [1e-2, 1e-5, 1e-9] {
            let c = lowrank_recompress(&noisy, eps).unwrap();
            assert!(c.to_dense().unwrap().sub(&full).unwrap().frobenius_norm() <= eps * full.frobenius_norm());
        }
    }

    #[test]
    fn incremental_matches_batch() {
        let mut lr = LowRank { w: Matrix::zeros(50, 0), d: Matrix::zeros(0, 0), y: Matrix::zeros(30, 0) };
        let mut batch: Option<LowRank> = None;
        for t in 0..6u64 {
            let w = gaussian_matrix(50, 2, SeededStream::new(10 + t, 0)).scaled(0.3f64.powi(t as i32));
            let y = gaussian_matrix(30, 2, SeededStream::new(20 + t, 0));
            append_recompressed(&mut lr, &w, 1.5, &y, 1e-13).unwrap();
            match &mut batch {
                Some(b) => b.append(&w, 1.5, &y).unwrap(),
                None => batch = Some(LowRank { w: w.clone(), d: Matrix::identity(2).scaled(1.5), y: y.clone() }),
            }
        }
        let want = batch.unwrap().to_dense().unwrap();
        assert!(lr.to_dense().unwrap().sub(&want).unwrap().frobenius_norm() <= 1e-12 * want.frobenius_norm());
        assert!(lr.w.orthonormality_defect() < 1e-12 && lr.y.orthonormality_defect() < 1e-12);
        // exact low rank collapses
        let mut lr = LowRank { w: Matrix::zeros(40, 0), d: Matrix::zeros(0, 0), y: Matrix::zeros(7, 0) };
        let base = gaussian_matrix(40, 1, SeededStream::new(1, 0));
        let yb = gaussian_matrix(7, 1, SeededStream::new(2, 0));
        for _ in 0..4 {
            append_recompressed(&mut lr, &base, 2.0, &yb, 1e-12).unwrap();
        }
        assert_eq!(lr.rank(), 1);
    }

    #[test]
    fn zero_product_keeps_one_term() {
        let lr = LowRank { w: Matrix::zeros(5, 3), d: Matrix::identity(3), y: Matrix::zeros(4, 3) };
        let c = lowrank_recompress(&lr, 1e-8).unwrap();
        assert_eq!(c.rank(), 1);
        assert_eq!(c.to_dense().unwrap().max_abs(), 0.0);
    }
}
