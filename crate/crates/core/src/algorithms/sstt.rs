use crate::algorithms::{DecomposeConfig, Decomposition, Run};
use crate::error::Result;
use crate::oracle::TensorOracle;
use crate::sketch::drm::{KhatriRaoDrm, KIND_COLUMNS};
use crate::sketch::{parallel_multi_sketch, Contraction, OracleSource};
use crate::tt::{TtCore, TtTensor};

/// Serial streaming TT: one column sketch and one projection of the source,
/// then cores peeled off the shrinking projected tensor, which stays
/// distributed across the workers.
pub fn sstt(oracle: &dyn TensorOracle, cfg: &DecomposeConfig) -> Result<Decomposition> {
    let mut run = Run::new(oracle, cfg)?;
    let d = run.dims.len();
    let dims = run.dims.clone();
    let src = OracleSource::new(oracle, run.partition.clone())?;

    run.counters().begin_phase("sketch");
    let drm = KhatriRaoDrm::new(cfg.seed, KIND_COLUMNS, 1, &dims, 1..d, run.ranks[0] + cfg.oversample).with_structure(cfg.drm);
    let acc = parallel_multi_sketch(&src, &[Contraction::Columns { keep: 1, drm }], &run.engine)?.remove(0);
    let b1 = acc.into_basis(run.ranks[0], run.counters())?;
    run.note_rank("column", 1, b1.rank);
    let mut cores = vec![TtCore::new(1, dims[0], b1.rank, b1.q.as_slice().to_vec())?];

    run.counters().begin_phase("project");
    let proj = Contraction::Project { left: Some((1, &b1.q)), right: None };
    let mut z = parallel_multi_sketch(&src, &[proj], &run.engine)?.remove(0).into_blocked()?;
    drop(b1);

    for k in 2..d {
        let zd = z.dims().to_vec();
        let s = zd[0];
        let drm = KhatriRaoDrm::new(cfg.seed, KIND_COLUMNS, k, &zd, 2..zd.len(), run.ranks[k - 1] + cfg.oversample).with_structure(cfg.drm);
        let acc = parallel_multi_sketch(&z, &[Contraction::Columns { keep: 2, drm }], &run.engine)?.remove(0);
        let basis = acc.into_basis(run.ranks[k - 1], run.counters())?;
        run.note_rank("column", k, basis.rank);
        cores.push(TtCore::new(s, dims[k - 1], basis.rank, basis.q.as_slice().to_vec())?);
        let proj = Contraction::Project { left: Some((2, &basis.q)), right: None };
        z = parallel_multi_sketch(&z, &[proj], &run.engine)?.remove(0).into_blocked()?;
    }

    let last = z.to_dense()?;
    cores.push(TtCore::new(last.dims()[0], dims[d - 1], 1, last.values().to_vec())?);
    drop(z);
    let tt = TtTensor::new(cores)?;
    // interfaces too large to form are left out
    let left = (1..d).filter_map(|k| tt.left_interface(k).ok().map(|q| (k, q))).collect();
    Ok(run.finish(tt, left, Vec::new()))
}
