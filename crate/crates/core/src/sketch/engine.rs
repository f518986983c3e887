//! Streaming multi-sketch: every sub-tensor is loaded once and contributes
//! to all requested sketches; owners reduce contributions in ascending
//! sub-tensor order so results do not depend on the worker count.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::kernels::qr::{cpqr_truncated, tree_qr};
use crate::kernels::svd::Truncation;
use crate::matrix::Matrix;
use crate::oracle::TensorOracle;
use crate::sketch::contract::{box_offsets, gather_rows, project_block};
use crate::sketch::counters::{Charge, CostCounters};
use crate::sketch::drm::KhatriRaoDrm;
use crate::sketch::partition::{owner_map, Partition, SubTensorRef};
use crate::tensor::{DenseTensor, Shape};

/// One sketch requested from a stream. Mode boundaries are 0-based.
#[derive(Clone, Debug)]
pub enum Contraction<'a> {
    /// `X_k Φ`: keeps modes `0..keep`, contracts the rest with `drm`.
    Columns { keep: usize, drm: KhatriRaoDrm },
    /// `X_kᵀ Ψ`: contracts modes `0..split` with `drm`, keeps the rest.
    Rows { split: usize, drm: KhatriRaoDrm },
    /// `X ×_{modes < k} Qᵀ ×_{modes ≥ k'} Rᵀ` for `left = (k, Q)` and
    /// `right = (k', R)`.
    Project { left: Option<(usize, &'a Matrix)>, right: Option<(usize, &'a Matrix)> },
}

impl Contraction<'_> {
    fn kept(&self, d: usize) -> Range<usize> {
        match self {
            Contraction::Columns { keep, .. } => 0..*keep,
            Contraction::Rows { split, .. } => *split..d,
            Contraction::Project { left, right } => left.map_or(0, |l| l.0)..right.map_or(d, |r| r.0),
        }
    }

    /// Leading and trailing extents of the output around the kept modes.
    fn pre_post(&self) -> (usize, usize) {
        match self {
            Contraction::Columns { drm, .. } | Contraction::Rows { drm, .. } => (1, drm.width()),
            Contraction::Project { left, right } => {
                (left.map_or(1, |l| l.1.cols()), right.map_or(1, |r| r.1.cols()))
            }
        }
    }

    fn validate(&self, dims: &[usize]) -> Result<()> {
        let d = dims.len();
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            Contraction::Columns { keep, drm } => {
                if *keep == 0 || *keep >= d || drm.modes() != (*keep..d) {
                    return bad(format!("column sketch keeping {keep} of {d} modes"));
                }
            }
            Contraction::Rows { split, drm } => {
                if *split == 0 || *split >= d || drm.modes() != (0..*split) {
                    return bad(format!("row sketch split at {split} of {d} modes"));
                }
            }
            Contraction::Project { left, right } => {
                let k = left.map_or(0, |l| l.0);
                let kr = right.map_or(d, |r| r.0);
                if left.is_none() && right.is_none() || k > kr || kr > d {
                    return bad(format!("projection with boundaries {k} and {kr} of {d} modes"));
                }
                if let Some((k, q)) = left {
                    if q.rows() != dims[..*k].iter().product::<usize>() {
                        return Err(Error::ShapeMismatch(format!("left basis has {} rows", q.rows())));
                    }
                }
                if let Some((k, r)) = right {
                    if r.rows() != dims[*k..].iter().product::<usize>() {
                        return Err(Error::ShapeMismatch(format!("right basis has {} rows", r.rows())));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A partitioned tensor that can hand out its sub-tensors.
pub trait BlockSource: Sync {
    fn dims(&self) -> &[usize];

    fn partition(&self) -> &Partition;

    /// Worker that streams block `j` in a pool of `workers`.
    fn worker_for(&self, j: usize, workers: usize) -> usize {
        j % workers
    }

    fn load(&self, sub: &SubTensorRef, worker: usize, counters: &CostCounters) -> Result<LoadedBlock<'_>>;
}

pub struct LoadedBlock<'a> {
    pub data: Cow<'a, [f64]>,
    _charge: Option<Charge>,
}

/// An entry oracle streamed block by block.
pub struct OracleSource<'a, O: TensorOracle + ?Sized> {
    oracle: &'a O,
    partition: Partition,
}

impl<'a, O: TensorOracle + ?Sized> OracleSource<'a, O> {
    pub fn new(oracle: &'a O, partition: Partition) -> Result<Self> {
        if partition.dims() != oracle.shape().dims() {
            return Err(Error::InvalidPartition(format!(
                "partition over {:?} for a tensor of dims {:?}",
                partition.dims(),
                oracle.shape().dims()
            )));
        }
        Ok(OracleSource { oracle, partition })
    }
}

impl<O: TensorOracle + ?Sized> BlockSource for OracleSource<'_, O> {
    fn dims(&self) -> &[usize] {
        self.partition.dims()
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn load(&self, sub: &SubTensorRef, worker: usize, counters: &CostCounters) -> Result<LoadedBlock<'_>> {
        let charge = counters.charge(worker, sub.len());
        let mut data = vec![0.0; sub.len()];
        self.oracle.fill_block(&sub.lo, &sub.hi, &mut data);
        Ok(LoadedBlock { data: Cow::Owned(data), _charge: Some(charge) })
    }
}

/// The load step of [`parallel_multi_sketch`] on its own: the dense block of `sub`, counted by the oracle.
pub fn extract_subtensor(oracle: &(impl TensorOracle + ?Sized), sub: &SubTensorRef) -> Result<DenseTensor> {
    let mut data = vec![0.0; sub.len()];
    oracle.fill_block(&sub.lo, &sub.hi, &mut data);
    DenseTensor::new(Shape::new(sub.dims())?, data)
}

/// Contribution of one block to the Khatri-Rao sketch defined by `drm`:
/// the block's slice of `X_k Φ` (suffix DRM) or of `X_kᵀ Ψ` (prefix DRM).
pub fn apply_kr_drm(block: &DenseTensor, sub: &SubTensorRef, drm: &KhatriRaoDrm) -> Result<Matrix> {
    if block.dims() != sub.dims().as_slice() {
        return Err(Error::ShapeMismatch(format!("block {:?} for sub-tensor {:?}", block.dims(), sub.dims())));
    }
    let modes = drm.modes();
    let d = block.dims().len();
    if modes.is_empty() || modes.end > d || (modes.start != 0 && modes.end != d) {
        return Err(Error::ShapeMismatch(format!("DRM over modes {modes:?} of a {d}-way block")));
    }
    let factors = drm.factors_for(&sub.lo, &sub.hi);
    Ok(drm.contract(block.values(), block.dims(), modes, &factors))
}

/// A distributed tensor held in memory by its owners, e.g. the projected
/// tensor of SSTT.
pub struct BlockedTensor {
    dims: Vec<usize>,
    partition: Partition,
    blocks: Vec<Vec<f64>>,
    owners: Vec<usize>,
    _charges: Vec<Charge>,
}

impl BlockedTensor {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        let mut values = vec![0.0; self.dims.iter().product()];
        for (j, b) in self.blocks.iter().enumerate() {
            let sub = self.partition.subtensor(j);
            for (&o, &v) in box_offsets(&self.dims, &sub.lo, &sub.hi).iter().zip(b) {
                values[o] = v;
            }
        }
        DenseTensor::new(Shape::new(self.dims.clone())?, values)
    }
}

impl BlockSource for BlockedTensor {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn worker_for(&self, j: usize, _workers: usize) -> usize {
        self.owners[j]
    }

    fn load(&self, sub: &SubTensorRef, _worker: usize, _counters: &CostCounters) -> Result<LoadedBlock<'_>> {
        Ok(LoadedBlock { data: Cow::Borrowed(&self.blocks[sub.linear]), _charge: None })
    }
}

/// Sub-sketch blocks of one sketch, each with a single owner.
pub struct SketchAccumulator {
    kept: Range<usize>,
    dims: Vec<usize>,
    grid: Partition,
    pre: usize,
    post: usize,
    blocks: Vec<Vec<f64>>,
    owners: Vec<usize>,
    charges: Vec<Charge>,
}

/// Orthonormal basis of a sketch's column space.
pub struct Basis {
    pub q: Matrix,
    pub rank: usize,
    /// Resident rows per owner; dropped with the basis.
    pub charges: Vec<Charge>,
}

impl SketchAccumulator {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn owners(&self) -> &[usize] {
        &self.owners
    }

    pub fn block(&self, g: usize) -> &[f64] {
        &self.blocks[g]
    }

    /// Number of rows of the assembled matrix.
    pub fn rows(&self) -> usize {
        self.pre * self.dims.iter().product::<usize>()
    }

    pub fn cols(&self) -> usize {
        self.post
    }

    /// Row indices of block `g` inside the assembled matrix.
    fn row_offsets(&self, g: usize) -> Vec<usize> {
        let sub = self.grid.subtensor(g);
        let dims: Vec<usize> = std::iter::once(self.pre).chain(self.dims.iter().copied()).collect();
        let lo: Vec<usize> = std::iter::once(0).chain(sub.lo.iter().copied()).collect();
        let hi: Vec<usize> = std::iter::once(self.pre).chain(sub.hi.iter().copied()).collect();
        box_offsets(&dims, &lo, &hi)
    }

    fn block_matrix(&self, g: usize) -> Matrix {
        let rows = self.blocks[g].len() / self.post;
        Matrix::from_col_major(rows, self.post, self.blocks[g].clone()).expect("sized")
    }

    /// The sketch as one `(pre·N_kept) × post` matrix.
    pub fn assemble_matrix(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows(), self.post);
        for g in 0..self.blocks.len() {
            let rows = self.row_offsets(g);
            let b = &self.blocks[g];
            for c in 0..self.post {
                for (r, &gr) in rows.iter().enumerate() {
                    out[(gr, c)] = b[r + rows.len() * c];
                }
            }
        }
        out
    }

    /// Range of source modes kept by this sketch.
    pub fn kept(&self) -> Range<usize> {
        self.kept.clone()
    }

    /// Rank-`rank` CPQR basis of the sketch through a tree QR over the
    /// sub-sketch blocks. Falls back to a dense CPQR when the blocks hold
    /// fewer rows than columns.
    pub fn basis(&self, rank: usize, counters: &CostCounters) -> Result<Basis> {
        let q = self.orthonormal(rank)?;
        let charges = self.row_charges(q.cols(), counters);
        Ok(Basis { rank: q.cols(), q, charges })
    }

    /// [`Self::basis`] with the sketch released before the basis rows are
    /// charged, as an in-place factorization would.
    pub fn into_basis(self, rank: usize, counters: &CostCounters) -> Result<Basis> {
        let q = self.orthonormal(rank)?;
        let rows: Vec<(usize, usize)> =
            self.owners.iter().zip(&self.blocks).map(|(&o, b)| (o, b.len() / self.post)).collect();
        drop(self);
        let charges = rows.into_iter().map(|(o, r)| counters.charge(o, r * q.cols())).collect();
        Ok(Basis { rank: q.cols(), q, charges })
    }

    fn row_charges(&self, cols: usize, counters: &CostCounters) -> Vec<Charge> {
        (0..self.blocks.len())
            .map(|g| counters.charge(self.owners[g], self.blocks[g].len() / self.post * cols))
            .collect()
    }

    fn orthonormal(&self, rank: usize) -> Result<Matrix> {
        let rows = self.rows();
        let rank = rank.min(rows).min(self.post).max(1);
        if rows < self.post {
            return Ok(cpqr_truncated(&self.assemble_matrix(), Truncation::Rank(rank))?.q);
        }
        let blocks: Vec<Matrix> = (0..self.blocks.len()).map(|g| self.block_matrix(g)).collect();
        let tq = tree_qr(&blocks)?;
        let small = cpqr_truncated(&tq.r, Truncation::Rank(rank))?.q;
        let mut q = Matrix::zeros(rows, small.cols());
        for (g, qb) in tq.q_blocks.iter().enumerate() {
            let piece = qb.matmul(&small)?;
            for (r, &gr) in self.row_offsets(g).iter().enumerate() {
                for c in 0..piece.cols() {
                    q[(gr, c)] = piece[(r, c)];
                }
            }
        }
        Ok(q)
    }

    /// Output dims `(pre, kept…, post)` with `pre` and `post` kept even when 1.
    pub fn full_dims(&self) -> Vec<usize> {
        std::iter::once(self.pre).chain(self.dims.iter().copied()).chain(std::iter::once(self.post)).collect()
    }

    /// Keeps a projection's blocks resident as a new distributed tensor of
    /// dims `(pre, kept…)`; requires `post = 1`.
    pub fn into_blocked(self) -> Result<BlockedTensor> {
        if self.post != 1 {
            return Err(Error::ShapeMismatch("only single-sided projections stay distributed".into()));
        }
        let dims: Vec<usize> = std::iter::once(self.pre).chain(self.dims.iter().copied()).collect();
        let counts: Vec<usize> = std::iter::once(1).chain(self.grid.counts().iter().copied()).collect();
        Ok(BlockedTensor {
            partition: Partition::new(&dims, &counts)?,
            dims,
            blocks: self.blocks,
            owners: self.owners,
            _charges: self.charges,
        })
    }
}

/// Worker pool settings shared by every streaming pass of a run.
#[derive(Clone, Debug)]
pub struct SketchEngine {
    pub workers: usize,
    /// Largest sub-tensor (in scalars) a worker may load.
    pub block_budget: Option<usize>,
    pub counters: CostCounters,
}

impl SketchEngine {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        SketchEngine { workers, block_budget: None, counters: CostCounters::new(workers) }
    }
}

struct Contribution {
    sketch: usize,
    target: usize,
    source: usize,
    data: Vec<f64>,
    _charge: Charge,
}

struct Plan {
    kept: Range<usize>,
    grid: Partition,
    /// Sorted contributing sub-tensors per target block.
    sources: Vec<Vec<usize>>,
    cursor: Vec<usize>,
    pending: Vec<BTreeMap<usize, Contribution>>,
}

/// Streams every sub-tensor of `source` once and accumulates all
/// `contractions` from it.
pub fn parallel_multi_sketch(
    source: &dyn BlockSource,
    contractions: &[Contraction<'_>],
    engine: &SketchEngine,
) -> Result<Vec<SketchAccumulator>> {
    let dims = source.dims().to_vec();
    let d = dims.len();
    let part = source.partition();
    let workers = engine.workers;
    let counters = &engine.counters;
    if let Some(budget) = engine.block_budget {
        if part.max_block_len() > budget {
            return Err(Error::TooLarge(format!(
                "sub-tensors of up to {} scalars exceed the per-worker budget of {budget}",
                part.max_block_len()
            )));
        }
    }
    for c in contractions {
        c.validate(&dims)?;
    }

    let mut plans: Vec<Plan> = Vec::with_capacity(contractions.len());
    let mut accs: Vec<SketchAccumulator> = Vec::with_capacity(contractions.len());
    for c in contractions {
        let kept = c.kept(d);
        let grid = part.restrict(kept.clone());
        let targets = grid.num_blocks();
        let owners = owner_map(targets, workers);
        if owners.len() != targets || owners.iter().any(|&o| o >= workers) {
            return Err(Error::OwnershipGap(format!("{targets} sub-sketches, {} owners", owners.len())));
        }
        let mut sources = vec![Vec::new(); targets];
        for j in 0..part.num_blocks() {
            let sub = part.subtensor(j);
            sources[grid.linear(&sub.grid[kept.clone()])].push(j);
        }
        let (pre, post) = c.pre_post();
        let sizes: Vec<usize> = (0..targets).map(|g| pre * grid.subtensor(g).len() * post).collect();
        let charges = sizes.iter().zip(&owners).map(|(&s, &o)| counters.charge(o, s)).collect();
        accs.push(SketchAccumulator {
            kept: kept.clone(),
            dims: dims[kept.clone()].to_vec(),
            grid: grid.clone(),
            pre,
            post,
            blocks: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            owners,
            charges,
        });
        plans.push(Plan {
            kept,
            grid,
            sources,
            cursor: vec![0; targets],
            pending: (0..targets).map(|_| BTreeMap::new()).collect(),
        });
    }

    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); workers];
    for j in 0..part.num_blocks() {
        let w = source.worker_for(j, workers);
        if w >= workers {
            return Err(Error::OwnershipGap(format!("block {j} assigned to worker {w} of {workers}")));
        }
        queues[w].push(j);
    }
    let rounds = queues.iter().map(Vec::len).max().unwrap_or(0);

    let routes: Vec<(Range<usize>, Partition, Vec<usize>)> =
        plans.iter().zip(&accs).map(|(p, a)| (p.kept.clone(), p.grid.clone(), a.owners.clone())).collect();

    let process = |worker: usize, j: usize| -> Result<Vec<Contribution>> {
        let sub = part.subtensor(j);
        let block = source.load(&sub, worker, counters)?;
        let bdims = sub.dims();
        let mut out = Vec::with_capacity(contractions.len());
        for (i, c) in contractions.iter().enumerate() {
            let data = match c {
                Contraction::Columns { drm, .. } | Contraction::Rows { drm, .. } => {
                    let factors = drm.factors_for(&sub.lo, &sub.hi);
                    let _f = counters.charge(worker, factors.iter().map(Matrix::len).sum());
                    drm.contract(&block.data, &bdims, drm.modes(), &factors).into_vec()
                }
                Contraction::Project { left, right } => {
                    let lq = left.map(|(k, q)| (k, gather_rows(q, &dims[..k], &sub.lo[..k], &sub.hi[..k])));
                    let rr = right.map(|(k, r)| (k, gather_rows(r, &dims[k..], &sub.lo[k..], &sub.hi[k..])));
                    let held = lq.as_ref().map_or(0, |l| l.1.len()) + rr.as_ref().map_or(0, |r| r.1.len());
                    let _g = counters.charge(worker, held);
                    project_block(
                        &block.data,
                        &bdims,
                        lq.as_ref().map(|(k, m)| (*k, m)),
                        rr.as_ref().map(|(k, m)| (*k, m)),
                    )
                }
            };
            let (kept, grid, owners) = &routes[i];
            let target = grid.linear(&sub.grid[kept.clone()]);
            let owner = owners[target];
            if owner != worker {
                counters.record_message(data.len());
            }
            // the sender keeps the message until its owner takes it in order
            let charge = counters.charge(worker, data.len());
            out.push(Contribution { sketch: i, target, source: j, data, _charge: charge });
        }
        Ok(out)
    };

    for t in 0..rounds {
        let jobs: Vec<(usize, usize)> =
            queues.iter().enumerate().filter_map(|(w, q)| q.get(t).map(|&j| (w, j))).collect();
        let results: Vec<Result<Vec<Contribution>>> = if jobs.len() == 1 {
            vec![process(jobs[0].0, jobs[0].1)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = jobs.iter().map(|&(w, j)| s.spawn(move || process(w, j))).collect();
                handles.into_iter().map(|h| h.join().expect("sketch worker panicked")).collect()
            })
        };
        for r in results {
            for c in r? {
                plans[c.sketch].pending[c.target].insert(c.source, c);
            }
        }
        // owners reduce whatever continues their ascending source sequence
        for (plan, acc) in plans.iter_mut().zip(accs.iter_mut()) {
            for g in 0..plan.sources.len() {
                while let Some(&next) = plan.sources[g].get(plan.cursor[g]) {
                    let Some(c) = plan.pending[g].remove(&next) else { break };
                    let _received = counters.charge(acc.owners[g], c.data.len());
                    for (a, v) in acc.blocks[g].iter_mut().zip(&c.data) {
                        *a += v;
                    }
                    plan.cursor[g] += 1;
                }
            }
        }
    }
    if plans.iter().any(|p| p.pending.iter().any(|m| !m.is_empty())) {
        return Err(Error::OwnershipGap("contributions left unreduced".into()));
    }
    Ok(accs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{hilbert, random_tt};
    use crate::sketch::drm::{KIND_COLUMNS, KIND_ROWS};

    fn engine(c: usize) -> SketchEngine {
        SketchEngine::new(c)
    }

    #[test]
    fn blocks_reassemble_the_tensor() {
        let h = hilbert(&[12, 12, 12]).unwrap();
        let dense = h.materialize().unwrap();
        let p = Partition::new(&[12, 12, 12], &[3, 2, 2]).unwrap();
        let mut values = vec![0.0; dense.values().len()];
        for j in 0..p.num_blocks() {
            let sub = p.subtensor(j);
            let b = extract_subtensor(&h, &sub).unwrap();
            for (&o, &v) in box_offsets(&[12, 12, 12], &sub.lo, &sub.hi).iter().zip(b.values()) {
                values[o] = v;
            }
        }
        assert_eq!(values, dense.values());
        let whole = extract_subtensor(&h, &Partition::new(&[12, 12, 12], &[1, 1, 1]).unwrap().subtensor(0)).unwrap();
        assert_eq!(whole, dense);
    }

    #[test]
    fn sums_match_dense_sketches_and_are_deterministic() {
        let dims = [6, 6, 6];
        let h = hilbert(&dims).unwrap();
        let x = h.materialize().unwrap();
        let p = Partition::new(&dims, &[2, 2, 2]).unwrap();
        let drms = [
            KhatriRaoDrm::new(7, KIND_COLUMNS, 1, &dims, 1..3, 4),
            KhatriRaoDrm::new(7, KIND_COLUMNS, 2, &dims, 2..3, 4),
            KhatriRaoDrm::new(7, KIND_ROWS, 2, &dims, 0..2, 4),
        ];
        let cs = [
            Contraction::Columns { keep: 1, drm: drms[0].clone() },
            Contraction::Columns { keep: 2, drm: drms[1].clone() },
            Contraction::Rows { split: 2, drm: drms[2].clone() },
        ];
        let mut runs = Vec::new();
        for c in [1, 2, 3, 4] {
            h.counter().reset();
            let src = OracleSource::new(&h, p.clone()).unwrap();
            let accs = parallel_multi_sketch(&src, &cs, &engine(c)).unwrap();
            assert_eq!(h.eval_count(), 216);
            runs.push(accs.iter().map(SketchAccumulator::assemble_matrix).collect::<Vec<_>>());
        }
        for r in &runs[1..] {
            assert_eq!(r, &runs[0]);
        }
        let want = [
            x.unfold(1).unwrap().matmul(&drms[0].dense()).unwrap(),
            x.unfold(2).unwrap().matmul(&drms[1].dense()).unwrap(),
            x.unfold(2).unwrap().tr_matmul(&drms[2].dense()).unwrap(),
        ];
        for (g, w) in runs[0].iter().zip(&want) {
            assert!(g.sub(w).unwrap().max_abs() <= 1e-12 * w.max_abs());
        }
    }

    #[test]
    fn single_block_contribution() {
        let dims = [3, 4, 5];
        let x = random_tt(&dims, &[2, 2], 3).unwrap().full().unwrap();
        let p = Partition::new(&dims, &[1, 1, 1]).unwrap();
        let drm = KhatriRaoDrm::new(1, KIND_COLUMNS, 2, &dims, 2..3, 3);
        let got = apply_kr_drm(&x, &p.subtensor(0), &drm).unwrap();
        let want = x.unfold(2).unwrap().matmul(&drm.dense()).unwrap();
        assert!(got.sub(&want).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn exact_rank_span_and_basis() {
        let dims = [5, 6, 7];
        let tt = random_tt(&dims, &[2, 2], 5).unwrap();
        let x = tt.full().unwrap();
        let p = Partition::new(&dims, &[2, 3, 2]).unwrap();
        let drm = KhatriRaoDrm::new(3, KIND_COLUMNS, 1, &dims, 1..3, 5);
        let oracle = x.as_oracle();
        let src = OracleSource::new(&oracle, p).unwrap();
        let eng = engine(3);
        let accs = parallel_multi_sketch(&src, &[Contraction::Columns { keep: 1, drm }], &eng).unwrap();
        let b = accs[0].basis(2, &eng.counters).unwrap();
        assert!(b.q.orthonormality_defect() < 1e-12);
        let x1 = x.unfold(1).unwrap();
        let resid = x1.sub(&b.q.matmul(&b.q.tr_matmul(&x1).unwrap()).unwrap()).unwrap();
        assert!(resid.frobenius_norm() <= 1e-10 * x1.frobenius_norm());
    }

    #[test]
    fn projection_stays_distributed() {
        let dims = [4, 5, 6];
        let x = random_tt(&dims, &[2, 3], 1).unwrap().full().unwrap();
        let q = crate::kernels::random::gaussian_matrix(4, 2, crate::kernels::random::SeededStream::new(2, 2));
        let p = Partition::new(&dims, &[2, 2, 3]).unwrap();
        let eng = engine(2);
        let oracle = x.as_oracle();
        let src = OracleSource::new(&oracle, p).unwrap();
        let accs =
            parallel_multi_sketch(&src, &[Contraction::Project { left: Some((1, &q)), right: None }], &eng).unwrap();
        let z = accs.into_iter().next().unwrap().into_blocked().unwrap();
        let want = x.mode_product(&q.transpose(), 1).unwrap();
        let got = z.to_dense().unwrap();
        assert!(got.values().iter().zip(want.values()).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(z.partition().counts(), &[1, 2, 3]);
    }

    #[test]
    fn budget_and_ownership_guards() {
        let h = hilbert(&[8, 8]).unwrap();
        let src = OracleSource::new(&h, Partition::new(&[8, 8], &[2, 2]).unwrap()).unwrap();
        let mut eng = engine(2);
        eng.block_budget = Some(10);
        let drm = KhatriRaoDrm::new(1, KIND_COLUMNS, 1, &[8, 8], 1..2, 3);
        let err = parallel_multi_sketch(&src, &[Contraction::Columns { keep: 1, drm }], &eng);
        assert!(matches!(err, Err(Error::TooLarge(_))));
        assert!(OracleSource::new(&h, Partition::new(&[8, 4], &[1, 1]).unwrap()).is_err());
    }
}
