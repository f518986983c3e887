use crate::algorithms::{DecomposeConfig, Decomposition, Run};
use crate::error::{Error, Result};
use crate::kernels::svd::pseudo_inverse_apply;
use crate::matrix::Matrix;
use crate::oracle::TensorOracle;
use crate::sketch::drm::{KhatriRaoDrm, KIND_COLUMNS, KIND_EXTRA, KIND_ROWS};
use crate::sketch::{parallel_multi_sketch, Basis, Contraction, OracleSource, SketchAccumulator};
use crate::tt::{TtCore, TtTensor};

/// Above this the one-pass least-squares solves are flagged.
const ILL_CONDITIONED: f64 = 1e12;

/// Two-pass sketching: column bases of every unfolding, last core from a
/// second projection pass.
pub fn pstt(oracle: &dyn TensorOracle, cfg: &DecomposeConfig) -> Result<Decomposition> {
    run_pstt(oracle, cfg, false)
}

/// Single pass: the last core is recovered from an extra row sketch of
/// `X_{d−1}` through a small least-squares solve.
pub fn pstt_onepass(oracle: &dyn TensorOracle, cfg: &DecomposeConfig) -> Result<Decomposition> {
    run_pstt(oracle, cfg, true)
}

/// Column bases left of the middle index, row bases right of it, middle
/// core from a second two-sided projection pass.
pub fn pstt2(oracle: &dyn TensorOracle, cfg: &DecomposeConfig) -> Result<Decomposition> {
    run_pstt2(oracle, cfg, false)
}

/// PSTT2 in a single pass; the middle core comes from an extra row sketch.
pub fn pstt2_onepass(oracle: &dyn TensorOracle, cfg: &DecomposeConfig) -> Result<Decomposition> {
    run_pstt2(oracle, cfg, true)
}

fn column_drm(cfg: &DecomposeConfig, run: &Run, k: usize) -> KhatriRaoDrm {
    let d = run.dims.len();
    KhatriRaoDrm::new(cfg.seed, KIND_COLUMNS, k, &run.dims, k..d, run.ranks[k - 1] + cfg.oversample).with_structure(cfg.drm)
}

fn row_drm(cfg: &DecomposeConfig, run: &Run, k: usize) -> KhatriRaoDrm {
    KhatriRaoDrm::new(cfg.seed, KIND_ROWS, k, &run.dims, 0..k, run.ranks[k - 1] + cfg.oversample).with_structure(cfg.drm)
}

/// `basisᵀ Φ` for a basis whose rows are indexed by the DRM's modes.
fn basis_times_drm(basis: &Matrix, drm: &KhatriRaoDrm, dims: &[usize]) -> Matrix {
    let modes = drm.modes();
    let tdims: Vec<usize> = dims[modes.clone()].iter().copied().chain(std::iter::once(basis.cols())).collect();
    let factors = drm.factors_for(&vec![0; dims.len()], dims);
    drm.contract(basis.as_slice(), &tdims, 0..modes.len(), &factors)
}

/// `G_1 = Q_1`, `G_k = Q_{k−1}ᵀ reshape(Q_k)`.
fn column_cores(bases: &[Matrix], dims: &[usize]) -> Result<Vec<TtCore>> {
    let mut cores = Vec::with_capacity(bases.len());
    for (k, q) in bases.iter().enumerate() {
        if k == 0 {
            cores.push(TtCore::new(1, dims[0], q.cols(), q.as_slice().to_vec())?);
        } else {
            let prev = &bases[k - 1];
            let wide = q.clone().reshape(prev.rows(), dims[k] * q.cols())?;
            cores.push(TtCore::new(prev.cols(), dims[k], q.cols(), prev.tr_matmul(&wide)?.into_vec())?);
        }
    }
    Ok(cores)
}

/// Cores right of the middle from row bases `P_m..P_{d−1}` (`rows[0]` is
/// `P_m`): `G_k(a, i, b) = Σ_J P_{k−1}[(i, J), a] P_k[J, b]`, `G_d = P_{d−1}ᵀ`.
fn row_cores(rows: &[Matrix], dims: &[usize], m: usize) -> Result<Vec<TtCore>> {
    let d = dims.len();
    let mut cores = Vec::with_capacity(rows.len());
    for (idx, p) in rows.iter().enumerate() {
        let k = m + idx + 1; // 1-based core index built from P_{k−1}
        let n = dims[k - 1];
        if k == d {
            cores.push(TtCore::new(p.cols(), n, 1, p.transpose().into_vec())?);
            continue;
        }
        let next = &rows[idx + 1];
        let (a_dim, b_dim) = (p.cols(), next.cols());
        let mut data = vec![0.0; a_dim * n * b_dim];
        for a in 0..a_dim {
            let slab = Matrix::from_col_major(n, next.rows(), p.column(a).to_vec())?;
            let g = slab.matmul(next)?;
            for b in 0..b_dim {
                for i in 0..n {
                    data[a + a_dim * (i + n * b)] = g[(i, b)];
                }
            }
        }
        cores.push(TtCore::new(a_dim, n, b_dim, data)?);
    }
    Ok(cores)
}

/// Bases of the sketches, each sketch released as soon as its basis exists.
fn bases_of(run: &mut Run, label: &str, accs: Vec<SketchAccumulator>, ks: &[usize]) -> Result<Vec<Basis>> {
    ks.iter()
        .zip(accs)
        .map(|(&k, acc)| {
            let b = acc.into_basis(run.ranks[k - 1], run.counters())?;
            run.note_rank(label, k, b.rank);
            Ok(b)
        })
        .collect()
}

fn least_squares(run: &mut Run, a: &Matrix, b: &Matrix, what: &str) -> Result<Matrix> {
    let ls = pseudo_inverse_apply(a, b)?;
    if ls.condition > ILL_CONDITIONED {
        run.warnings.push(format!("{what}: sketched system has condition number {:.3e}", ls.condition));
    }
    Ok(ls.x)
}

fn run_pstt(oracle: &dyn TensorOracle, cfg: &DecomposeConfig, onepass: bool) -> Result<Decomposition> {
    let mut run = Run::new(oracle, cfg)?;
    let d = run.dims.len();
    let dims = run.dims.clone();
    let src = OracleSource::new(oracle, run.partition.clone())?;

    run.counters().begin_phase("sketch");
    let mut cs: Vec<Contraction> = (1..d).map(|k| Contraction::Columns { keep: k, drm: column_drm(cfg, &run, k) }).collect();
    let extra = KhatriRaoDrm::new(cfg.seed, KIND_EXTRA, d - 1, &dims, 0..d - 1, run.ranks[d - 2] + cfg.oversample).with_structure(cfg.drm);
    if onepass {
        cs.push(Contraction::Rows { split: d - 1, drm: extra.clone() });
    }
    let mut accs = parallel_multi_sketch(&src, &cs, &run.engine)?;
    let extra_acc = if onepass { accs.pop() } else { None };

    run.counters().begin_phase("basis");
    let ks: Vec<usize> = (1..d).collect();
    let bases = bases_of(&mut run, "column", accs, &ks)?;
    let qs: Vec<Matrix> = bases.iter().map(|b| b.q.clone()).collect();
    let mut cores = column_cores(&qs, &dims)?;
    let q_last = &qs[d - 2];

    let last = match extra_acc {
        Some(acc) => {
            // T_{d−1}ᵀ = X_{d−1}ᵀ Ψ and (Ψᵀ Q_{d−1}) G_d ≈ T_{d−1}
            let t = acc.assemble_matrix().transpose();
            let m = basis_times_drm(q_last, &extra, &dims).transpose();
            least_squares(&mut run, &m, &t, "last core")?
        }
        None => {
            run.counters().begin_phase("project");
            let accs = parallel_multi_sketch(
                &src,
                &[Contraction::Project { left: Some((d - 1, q_last)), right: None }],
                &run.engine,
            )?;
            accs[0].assemble_matrix().reshape(q_last.cols(), dims[d - 1])?
        }
    };
    cores.push(TtCore::new(q_last.cols(), dims[d - 1], 1, last.into_vec())?);
    let tt = TtTensor::new(cores)?;
    let left = ks.into_iter().zip(qs).collect();
    drop(bases);
    Ok(run.finish(tt, left, Vec::new()))
}

fn run_pstt2(oracle: &dyn TensorOracle, cfg: &DecomposeConfig, onepass: bool) -> Result<Decomposition> {
    let mut run = Run::new(oracle, cfg)?;
    let d = run.dims.len();
    let dims = run.dims.clone();
    let m = cfg.middle.unwrap_or(d.div_ceil(2));
    if m == 0 || m > d {
        return Err(Error::InvalidArgument(format!("middle index {m} outside 1..={d}")));
    }
    let src = OracleSource::new(oracle, run.partition.clone())?;

    run.counters().begin_phase("sketch");
    let left_ks: Vec<usize> = (1..m).collect();
    let right_ks: Vec<usize> = (m..d).collect();
    let mut cs: Vec<Contraction> = left_ks
        .iter()
        .map(|&k| Contraction::Columns { keep: k, drm: column_drm(cfg, &run, k) })
        .chain(right_ks.iter().map(|&k| Contraction::Rows { split: k, drm: row_drm(cfg, &run, k) }))
        .collect();
    // one-pass middle: row sketch of X_{m−1}, or a column sketch of X_1 when m = 1
    let extra = if m >= 2 {
        KhatriRaoDrm::new(cfg.seed, KIND_EXTRA, m - 1, &dims, 0..m - 1, run.ranks[m - 2] + cfg.oversample).with_structure(cfg.drm)
    } else {
        KhatriRaoDrm::new(cfg.seed, KIND_EXTRA, 1, &dims, 1..d, run.ranks[0] + cfg.oversample).with_structure(cfg.drm)
    };
    if onepass {
        cs.push(if m >= 2 {
            Contraction::Rows { split: m - 1, drm: extra.clone() }
        } else {
            Contraction::Columns { keep: 1, drm: extra.clone() }
        });
    }
    let mut accs = parallel_multi_sketch(&src, &cs, &run.engine)?;
    let extra_acc = if onepass { accs.pop() } else { None };

    run.counters().begin_phase("basis");
    let right_accs = accs.split_off(left_ks.len());
    let lb = bases_of(&mut run, "column", accs, &left_ks)?;
    let rb = bases_of(&mut run, "row", right_accs, &right_ks)?;
    let qs: Vec<Matrix> = lb.iter().map(|b| b.q.clone()).collect();
    let ps: Vec<Matrix> = rb.iter().map(|b| b.q.clone()).collect();
    let q_left = qs.last();
    let p_right = ps.first();
    let a = q_left.map_or(1, Matrix::cols);
    let b = p_right.map_or(1, Matrix::cols);
    let n_m = dims[m - 1];

    let middle = match extra_acc {
        Some(acc) if m >= 2 => {
            // Y = X_{m−1}ᵀ Ψ, rows (i_m, J); Z(c, i_m, :) = Y[(i_m, ·), c] P_m
            let y = acc.assemble_matrix();
            let w = y.cols();
            let rest = y.rows() / n_m;
            let mut z = Matrix::zeros(w, n_m * b);
            for c in 0..w {
                let slab = Matrix::from_col_major(n_m, rest, y.column(c).to_vec())?;
                let zc = match p_right {
                    Some(p) => slab.matmul(p)?,
                    None => slab,
                };
                for (e, v) in zc.as_slice().iter().enumerate() {
                    z[(c, e)] = *v;
                }
            }
            let q = q_left.expect("m ≥ 2 has a left basis");
            let mm = basis_times_drm(q, &extra, &dims).transpose();
            least_squares(&mut run, &mm, &z, "middle core")?
        }
        Some(acc) => {
            // m = 1: X_1 Φ ≈ G_1 (P_1ᵀ Φ)
            let c = acc.assemble_matrix();
            let p = p_right.expect("m = 1 < d has a right basis");
            let pt_phi = basis_times_drm(p, &extra, &dims);
            least_squares(&mut run, &pt_phi.transpose(), &c.transpose(), "first core")?.transpose()
        }
        None => {
            run.counters().begin_phase("project");
            let proj = Contraction::Project {
                left: q_left.map(|q| (m - 1, q)),
                right: p_right.map(|p| (m, p)),
            };
            let accs = parallel_multi_sketch(&src, &[proj], &run.engine)?;
            Matrix::from_col_major(a * n_m, b, accs[0].assemble_matrix().into_vec())?
        }
    };

    let mut cores = column_cores(&qs, &dims)?;
    cores.push(TtCore::new(a, n_m, b, middle.into_vec())?);
    cores.extend(row_cores(&ps, &dims, m)?);
    let tt = TtTensor::new(cores)?;
    let left = left_ks.into_iter().zip(qs).collect();
    let right = right_ks.into_iter().zip(ps).collect();
    drop((lb, rb));
    Ok(run.finish(tt, left, right))
}
