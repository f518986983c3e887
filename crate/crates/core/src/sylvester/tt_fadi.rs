use crate::error::{Error, Result};
use crate::kernels::qr::cpqr_truncated;
use crate::kernels::svd::Truncation;
use crate::matrix::Matrix;
use crate::sketch::CostCounters;
use crate::sylvester::fadi::{append_recompressed, LowRank};
use crate::sylvester::operator::{kron_shifted_solve, kron_solve_cost};
use crate::sylvester::{zolotarev_shifts, Interval, NormalOperator, ShiftParameters};
use crate::tensor::{DenseTensor, Shape};
use crate::tt::{TtCore, TtTensor};

/// `X ×₁ A + X ×₂ B + X ×₃ C = F` with normal `A, B, C` and `F` in TT format.
#[derive(Clone, Debug)]
pub struct Sylvester3DProblem {
    pub a: NormalOperator,
    pub b: NormalOperator,
    pub c: NormalOperator,
    pub f: TtTensor,
}

impl Sylvester3DProblem {
    pub fn new(a: NormalOperator, b: NormalOperator, c: NormalOperator, f: TtTensor) -> Result<Self> {
        if f.dims() != [a.dim(), b.dim(), c.dim()] {
            return Err(Error::ShapeMismatch(format!(
                "right-hand side {:?} vs operators ({}, {}, {})",
                f.dims(),
                a.dim(),
                b.dim(),
                c.dim()
            )));
        }
        let sum = a.interval().plus(&b.interval()).plus(&c.interval());
        if sum.contains(0.0) {
            return Err(Error::InvalidArgument(format!(
                "λ(A) + λ(B) + λ(C) may vanish: the sum of spectral intervals is {sum}"
            )));
        }
        Ok(Sylvester3DProblem { a, b, c, f })
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.a.dim(), self.b.dim(), self.c.dim()]
    }

    /// Shared shift intervals `E ⊇ Λ(A) ∪ [Λ(A)+Λ(B)]` and
    /// `F ⊇ Λ(−C) ∪ [Λ(−B)+Λ(−C)]`.
    pub fn shift_intervals(&self) -> Result<(Interval, Interval)> {
        let (a, b, c) = (self.a.interval(), self.b.interval(), self.c.interval());
        let e = a.hull(&a.plus(&b));
        let f = c.negated().hull(&b.negated().plus(&c.negated()));
        if !e.is_disjoint(&f) {
            return Err(Error::OverlappingIntervals { e_lo: e.lo, e_hi: e.hi, f_lo: f.lo, f_hi: f.hi });
        }
        Ok((e, f))
    }

    /// `X ×₁ A + X ×₂ B + X ×₃ C`.
    pub fn apply(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let mut out = x.mode_product(&self.a.to_dense(), 1)?;
        for (k, op) in [(2, &self.b), (3, &self.c)] {
            let term = x.mode_product(&op.to_dense(), k)?;
            out.values_mut().iter_mut().zip(term.values()).for_each(|(o, t)| *o += t);
        }
        Ok(out)
    }

    /// `‖X ×₁ A + X ×₂ B + X ×₃ C − F‖_F / ‖F‖_F` by materialization.
    pub fn relative_residual(&self, x: &TtTensor) -> Result<f64> {
        let f = self.f.full()?;
        let ax = self.apply(&x.full()?)?;
        let diff: f64 = ax.values().iter().zip(f.values()).map(|(a, b)| (a - b) * (a - b)).sum();
        let fnorm = f.frobenius_norm();
        Ok(if fnorm == 0.0 { diff.sqrt() } else { diff.sqrt() / fnorm })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FadiStats {
    /// Shifted systems solved by the Z, W and Y recurrences; a Kronecker
    /// solve counts once per right-hand-side column.
    pub z_solves: usize,
    pub w_solves: usize,
    pub y_solves: usize,
    /// Scalar operations inside the shifted solves.
    pub solve_ops: u64,
    /// Solve operations plus recompressions and the final projection.
    pub total_ops: u64,
    /// Largest number of scalars resident at once across the three
    /// recurrences.
    pub peak_resident: usize,
    /// Largest single array allocated, in scalars.
    pub largest_array: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct FadiSolution {
    pub tt: TtTensor,
    pub shifts: ShiftParameters,
    pub stats: FadiStats,
}

/// TT-fADI: the column space of `X_1` from one fADI recurrence on `A`, and
/// the low-rank `X_2 ≈ W D Yᵀ` from the coupled Kronecker/`C` recurrences,
/// all driven by one shared set of shifts; the Z recurrence runs on its own
/// thread.
pub fn tt_fadi(problem: &Sylvester3DProblem, eps: f64) -> Result<FadiSolution> {
    let (e, f) = problem.shift_intervals()?;
    let shifts = zolotarev_shifts(e, f, eps)?;
    tt_fadi_with_shifts(problem, &shifts, eps)
}

/// [`tt_fadi`] with caller-supplied shifts; `eps` drives the truncations.
pub fn tt_fadi_with_shifts(problem: &Sylvester3DProblem, shifts: &ShiftParameters, eps: f64) -> Result<FadiSolution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    if shifts.is_empty() || shifts.p.len() != shifts.q.len() {
        return Err(Error::InvalidArgument("shift arrays must be nonempty and of equal length".into()));
    }
    let [n1, n2, n3] = problem.dims();
    let cores = problem.f.cores();
    let g1 = cores[0].unfold_left(); // n1 × r1
    let u2 = problem.f.left_interface(2)?; // (I ⊗ G_1)(G_2)_2: n1n2 × r2
    let g3t = cores[2].unfold_right().transpose(); // n3 × r2
    let r2 = g3t.cols();
    let counters = CostCounters::new(3);
    let (a, b) = (&problem.a, &problem.b);
    let neg_c = problem.c.negated();
    let (p, q) = (&shifts.p, &shifts.q);
    let l = shifts.len();

    let z_task = || -> Result<(Matrix, usize)> {
        let mut zj = a.shifted_solve(q[0], &g1)?;
        counters.add_flops(a.solve_cost(g1.cols()));
        let mut z = zj.clone();
        let mut held = counters.charge(0, z.len() + zj.len());
        for j in 0..l - 1 {
            let step = a.shifted_solve(q[j + 1], &zj.scaled(q[j + 1] - p[j]))?;
            counters.add_flops(a.solve_cost(zj.cols()));
            zj = zj.add(&step)?;
            z = Matrix::hcat(&[&z, &zj])?;
            drop(held);
            held = counters.charge(0, z.len() + zj.len());
        }
        drop(held);
        Ok((z, l))
    };

    let wy_task = || -> Result<(LowRank, usize, usize, u64)> {
        let mut extra = 0u64;
        let mut acc = LowRank { w: Matrix::zeros(n1 * n2, 0), d: Matrix::zeros(0, 0), y: Matrix::zeros(n3, 0) };
        let (mut wj, mut yj) = (Matrix::zeros(0, 0), Matrix::zeros(0, 0));
        let (mut w_solves, mut y_solves) = (0, 0);
        for j in 0..l {
            let held = counters.charge(1, acc.w.len() + wj.len());
            let held_y = counters.charge(2, acc.y.len() + yj.len());
            let (w_rhs, y_rhs) = if j == 0 {
                (u2.clone(), g3t.clone())
            } else {
                (wj.scaled(q[j] - p[j - 1]), yj.scaled(p[j] - q[j - 1]))
            };
            let w_step = kron_shifted_solve(a, b, q[j], &w_rhs)?;
            counters.add_flops(kron_solve_cost(a, b, w_rhs.cols()));
            w_solves += w_rhs.cols();
            let y_step = neg_c.shifted_solve(p[j], &y_rhs)?;
            counters.add_flops(neg_c.solve_cost(y_rhs.cols()));
            y_solves += 1;
            // right-hand side, step and the orthogonalized block are live at once
            let transient = counters.charge(1, 3 * w_rhs.len());
            drop(w_rhs);
            wj = if j == 0 { w_step } else { wj.add(&w_step)? };
            yj = if j == 0 { y_step } else { yj.add(&y_step)? };
            let grown = counters.charge(1, wj.len());
            extra += append_recompressed(&mut acc, &wj, q[j] - p[j], &yj, eps)?;
            drop((held, held_y, transient, grown));
        }
        Ok((acc, w_solves, y_solves, extra))
    };

    let (z_res, wy_res) = std::thread::scope(|s| {
        let z = s.spawn(z_task);
        let wy = wy_task();
        (z.join().expect("Z recurrence panicked"), wy)
    });
    let (z, z_solves) = z_res?;
    let (wdy, w_solves, y_solves, recompress_ops) = wy_res?;
    let solve_ops = counters.snapshot().flops;

    let mut warnings = Vec::new();
    let s2 = wdy.rank();
    if s2 >= n3 {
        warnings.push(format!("recompressed rank s_2 = {s2} reached n_3 = {n3}"));
    }
    let cp = cpqr_truncated(&z, Truncation::Tol(eps))?;
    let u1 = if cp.rank == 0 { Matrix::from_fn(n1, 1, |i, _| if i == 0 { 1.0 } else { 0.0 }) } else { cp.q };
    let s1 = u1.cols();
    let t = u1.tr_matmul(&wdy.w.clone().reshape(n1, n2 * s2)?)?;
    let h3 = wdy.d.matmul_tr(&wdy.y)?;
    let tt = TtTensor::new(vec![
        TtCore::new(1, n1, s1, u1.into_vec())?,
        TtCore::new(s1, n2, s2, t.into_vec())?,
        TtCore::new(s2, n3, 1, h3.into_vec())?,
    ])?;
    let z_cols = z.cols() as u64;
    // the tall factor before truncation, Z, the projected middle core and the operator data
    let largest = [n1 * n2 * (s2 + r2), z.len(), s1 * n2 * s2, n1 * n2 * r2, n1 * n1, n2 * n2, n3 * n3]
        .into_iter()
        .max()
        .unwrap_or(0);
    let snap = counters.snapshot();
    let stats = FadiStats {
        z_solves,
        w_solves,
        y_solves,
        solve_ops,
        total_ops: solve_ops + recompress_ops + 4 * n1 as u64 * z_cols * z_cols + 2 * (s1 * n1 * n2 * s2) as u64,
        peak_resident: snap.per_worker_peak.iter().sum(),
        largest_array: largest,
        warnings,
    };
    Ok(FadiSolution { tt, shifts: shifts.clone(), stats })
}

/// Elementwise solution `X_{ijk} = F_{ijk} / (a_i + b_j + c_k)` for
/// diagonal operators.
pub fn direct_diag_solve(a: &[f64], b: &[f64], c: &[f64], f: &DenseTensor) -> Result<DenseTensor> {
    if f.dims() != [a.len(), b.len(), c.len()] {
        return Err(Error::ShapeMismatch(format!("right-hand side {:?} vs spectra", f.dims())));
    }
    let mut x = DenseTensor::zeros(Shape::new(f.dims().to_vec())?);
    let mut idx = 0;
    for &ck in c {
        for &bj in b {
            for &ai in a {
                let den = ai + bj + ck;
                if den == 0.0 {
                    return Err(Error::InvalidArgument(format!("zero denominator a + b + c at linear index {idx}")));
                }
                x.values_mut()[idx] = f.values()[idx] / den;
                idx += 1;
            }
        }
    }
    Ok(x)
}

/// [`direct_diag_solve`] on a problem with diagonal operators.
pub fn direct_solve(problem: &Sylvester3DProblem) -> Result<DenseTensor> {
    if !(problem.a.is_diagonal() && problem.b.is_diagonal() && problem.c.is_diagonal()) {
        return Err(Error::InvalidArgument("the direct solver needs diagonal operators".into()));
    }
    direct_diag_solve(problem.a.eigenvalues(), problem.b.eigenvalues(), problem.c.eigenvalues(), &problem.f.full()?)
}

/// The demonstration family: `A = B = C = diag(a)` with `a` evenly spaced in
/// `[−1, −1/(30n)]`, `F` with TT ranks `(1, ⌊n/4⌋, 2, 1)` and uniform cores.
pub fn demo_problem(n: usize, seed: u64) -> Result<Sylvester3DProblem> {
    if n < 2 {
        return Err(Error::InvalidArgument("demo problem needs n ≥ 2".into()));
    }
    let lo = -1.0;
    let hi = -1.0 / (30.0 * n as f64);
    let a: Vec<f64> = (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect();
    let op = NormalOperator::diagonal(a)?;
    let f = crate::generators::random_tt(&[n, n, n], &[(n / 4).max(1), 2], seed)?;
    Sylvester3DProblem::new(op.clone(), op.clone(), op, f)
}
