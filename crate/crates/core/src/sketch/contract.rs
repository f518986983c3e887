//! Per-block kernels: Khatri-Rao contractions, two-sided projections and
//! row gathers over index boxes.

use std::ops::Range;

use crate::matrix::{gemm, MatMut, MatRef, Matrix};
use crate::tensor::mode_product_raw;

/// Global column-major offsets of the box `lo..hi` inside `dims`, in the
/// box's own column-major order.
pub fn box_offsets(dims: &[usize], lo: &[usize], hi: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    let mut stride = 1;
    for ((&n, &l), &h) in dims.iter().zip(lo).zip(hi) {
        let prev = std::mem::take(&mut out);
        out.reserve(prev.len() * (h - l));
        for i in l..h {
            out.extend(prev.iter().map(|&o| o + i * stride));
        }
        stride *= n;
    }
    out
}

/// Rows of `m` whose row multi-index (over `dims`) lies in the box.
pub fn gather_rows(m: &Matrix, dims: &[usize], lo: &[usize], hi: &[usize]) -> Matrix {
    let rows = box_offsets(dims, lo, hi);
    Matrix::from_fn(rows.len(), m.cols(), |i, j| m[(rows[i], j)])
}

/// Contracts the modes `contracted` (a prefix or a suffix of `dims`) of a
/// column-major block against the Khatri-Rao product of `factors`, one row
/// slice per contracted mode, all with the same width `w`.
///
/// Returns the `kept × w` matrix, kept modes in their natural order.
pub fn kr_contract(block: &[f64], dims: &[usize], contracted: Range<usize>, factors: &[Matrix]) -> Matrix {
    let d = dims.len();
    assert!(!contracted.is_empty() && (contracted.start == 0 || contracted.end == d));
    assert_eq!(factors.len(), contracted.len());
    let w = factors[0].cols();
    let kept: usize = dims.iter().enumerate().filter(|(m, _)| !contracted.contains(m)).map(|(_, n)| n).product();

    // the widest contracted mode goes through a GEMM, the rest are
    // contracted diagonally in the sketch column
    let star = contracted
        .clone()
        .rev()
        .max_by_key(|&m| dims[m])
        .expect("non-empty range");
    let ft = factors[star - contracted.start].transpose();
    let mut tdims = dims.to_vec();
    tdims[star] = w;
    let mut t = vec![0.0; block.len() / dims[star] * w];
    mode_product_raw(block, dims, star, &ft, &mut t);

    if contracted.len() == 1 {
        let t = Matrix::from_col_major(t.len() / w, w, t).expect("sized");
        return if star == d - 1 { t } else { t.reshape(w, kept).expect("sized").transpose() };
    }

    let mut out = Matrix::zeros(kept, w);
    let o = out.as_mut_slice();
    let mut kstride = vec![0usize; d];
    let mut s = 1;
    for m in (0..d).filter(|m| !contracted.contains(m)) {
        kstride[m] = s;
        s *= dims[m];
    }
    let others: Vec<usize> = contracted.clone().filter(|&m| m != star).collect();
    let mut idx = vec![0usize; d];
    let mut koff = 0usize;
    for &v in &t {
        let c = idx[star];
        let weight: f64 = others.iter().map(|&m| factors[m - contracted.start][(idx[m], c)]).product();
        o[koff + kept * c] += v * weight;
        for m in 0..d {
            idx[m] += 1;
            koff += kstride[m];
            if idx[m] < tdims[m] {
                break;
            }
            koff -= kstride[m] * idx[m];
            idx[m] = 0;
        }
    }
    out
}

/// `block ×_{1..k} Qᵀ ×_{k'..d} Rᵀ`, with `left = (k, Q_box)` and
/// `right = (k', R_box)` (0-based boundaries, rows restricted to the box).
///
/// The result is `(a, middle dims…, b)` flattened, with `a = 1` or `b = 1`
/// when the side is absent.
pub fn project_block(
    block: &[f64],
    dims: &[usize],
    left: Option<(usize, &Matrix)>,
    right: Option<(usize, &Matrix)>,
) -> Vec<f64> {
    let d = dims.len();
    let k = left.map_or(0, |(k, _)| k);
    let kr = right.map_or(d, |(k, _)| k);
    let l: usize = dims[..k].iter().product();
    let mid: usize = dims[k..kr].iter().product();
    let rn: usize = dims[kr..].iter().product();

    let (a, tmp) = match left {
        Some((_, q)) => {
            assert_eq!(q.rows(), l);
            let a = q.cols();
            let mut tmp = vec![0.0; a * mid * rn];
            gemm(
                1.0,
                MatRef::new(q).t(),
                MatRef::from_slice(block, l, mid * rn),
                0.0,
                MatMut::from_slice(&mut tmp, a, mid * rn),
            );
            (a, tmp)
        }
        None => (1, block.to_vec()),
    };
    match right {
        Some((_, r)) => {
            assert_eq!(r.rows(), rn);
            let b = r.cols();
            let mut out = vec![0.0; a * mid * b];
            gemm(
                1.0,
                MatRef::from_slice(&tmp, a * mid, rn),
                MatRef::new(r),
                0.0,
                MatMut::from_slice(&mut out, a * mid, b),
            );
            out
        }
        None => tmp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::random::{gaussian_matrix, SeededStream};
    use crate::sketch::drm::{KhatriRaoDrm, KIND_COLUMNS, KIND_ROWS};
    use crate::tensor::{DenseTensor, Shape};

    fn rand_tensor(dims: &[usize], id: u64) -> DenseTensor {
        let shape = Shape::new(dims.to_vec()).unwrap();
        let n = shape.numel();
        DenseTensor::new(shape, gaussian_matrix(n, 1, SeededStream::new(9, id)).into_vec()).unwrap()
    }

    #[test]
    fn offsets_of_a_box() {
        assert_eq!(box_offsets(&[4, 3], &[1, 1], &[3, 3]), vec![5, 6, 9, 10]);
        assert_eq!(box_offsets(&[], &[], &[]), vec![0]);
    }

    #[test]
    fn matches_dense_khatri_rao() {
        let dims = [3, 4, 2, 5];
        let x = rand_tensor(&dims, 1);
        for (range, kind) in [(2..4, KIND_COLUMNS), (1..4, KIND_COLUMNS), (0..2, KIND_ROWS), (0..1, KIND_ROWS), (3..4, KIND_COLUMNS)] {
            let drm = KhatriRaoDrm::new(4, kind, 1, &dims, range.clone(), 6);
            let factors: Vec<Matrix> = range.clone().map(|m| drm.factor(m)).collect();
            let got = kr_contract(x.values(), &dims, range.clone(), &factors);
            let want = if range.start == 0 {
                x.unfold(range.end).unwrap().tr_matmul(&drm.dense()).unwrap()
            } else {
                x.unfold(range.start).unwrap().matmul(&drm.dense()).unwrap()
            };
            assert!(got.sub(&want).unwrap().max_abs() < 1e-12, "{range:?}");
        }
    }

    #[test]
    fn ones_give_row_sums() {
        let dims = [2, 3, 4];
        let x = rand_tensor(&dims, 2);
        let ones: Vec<Matrix> = [3, 4].iter().map(|&n| Matrix::from_fn(n, 1, |_, _| 1.0)).collect();
        let got = kr_contract(x.values(), &dims, 1..3, &ones);
        let x1 = x.unfold(1).unwrap();
        for i in 0..2 {
            let s: f64 = (0..12).map(|j| x1[(i, j)]).sum();
            assert!((got[(i, 0)] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn two_sided_projection() {
        let dims = [3, 4, 5];
        let x = rand_tensor(&dims, 3);
        let q = gaussian_matrix(3, 2, SeededStream::new(1, 1));
        let r = gaussian_matrix(5, 2, SeededStream::new(1, 2));
        let got = project_block(x.values(), &dims, Some((1, &q)), Some((2, &r)));
        let want = x.mode_product(&q.transpose(), 1).unwrap().mode_product(&r.transpose(), 3).unwrap();
        assert!(got.iter().zip(want.values()).all(|(a, b)| (a - b).abs() < 1e-12));
        let only_left = project_block(x.values(), &dims, Some((1, &q)), None);
        let want = x.mode_product(&q.transpose(), 1).unwrap();
        assert!(only_left.iter().zip(want.values()).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
