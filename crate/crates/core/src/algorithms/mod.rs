//! TT construction: Parallel-TTSVD, the sketching family (PSTT, PSTT2 and
//! their one-pass variants) and serial streaming SSTT.

mod parallel_ttsvd;
mod pstt;
mod sstt;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::oracle::TensorOracle;
use crate::sketch::{CostCounters, CounterSnapshot, DrmKind, Partition, SketchEngine};
use crate::tt::{ttsvd, TtTarget, TtTensor};

pub use parallel_ttsvd::{parallel_ttsvd, parallel_ttsvd_with_bases};
pub use pstt::{pstt, pstt2, pstt2_onepass, pstt_onepass};
pub use sstt::sstt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Ttsvd,
    ParallelTtsvd,
    Pstt,
    PsttOnepass,
    Pstt2,
    Pstt2Onepass,
    Sstt,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ttsvd,
        Method::ParallelTtsvd,
        Method::Pstt,
        Method::PsttOnepass,
        Method::Pstt2,
        Method::Pstt2Onepass,
        Method::Sstt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ttsvd => "ttsvd",
            Method::ParallelTtsvd => "parallel-ttsvd",
            Method::Pstt => "pstt",
            Method::PsttOnepass => "pstt-onepass",
            Method::Pstt2 => "pstt2",
            Method::Pstt2Onepass => "pstt2-onepass",
            Method::Sstt => "sstt",
        }
    }

    /// Streaming methods driven by ranks and a partition.
    pub fn is_sketching(self) -> bool {
        !matches!(self, Method::Ttsvd | Method::ParallelTtsvd)
    }

    /// Number of full passes over the source.
    pub fn passes(self) -> u64 {
        match self {
            Method::PsttOnepass | Method::Pstt2Onepass | Method::Ttsvd | Method::ParallelTtsvd => 1,
            Method::Pstt | Method::Pstt2 | Method::Sstt => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecomposeConfig {
    /// `r_1..r_{d−1}`; mandatory for the sketching methods.
    pub ranks: Vec<usize>,
    /// Relative tolerance for the SVD-based methods when `ranks` is empty.
    pub tol: Option<f64>,
    pub oversample: usize,
    /// Defaults to [`Partition::default_for`].
    pub partition: Option<Partition>,
    pub workers: usize,
    pub seed: u64,
    /// 1-based middle index `d_*` of PSTT2, default `⌈d/2⌉`.
    pub middle: Option<usize>,
    /// Largest sub-tensor a worker may load, in scalars.
    pub block_budget: Option<usize>,
    pub drm: DrmKind,
}

impl DecomposeConfig {
    pub fn new(ranks: Vec<usize>) -> Self {
        DecomposeConfig {
            ranks,
            tol: None,
            oversample: 5,
            partition: None,
            workers: 1,
            seed: 0,
            middle: None,
            block_budget: None,
            drm: DrmKind::KhatriRao,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_partition(mut self, partition: Partition) -> Self {
        self.partition = Some(partition);
        self
    }

    pub fn with_oversample(mut self, p: usize) -> Self {
        self.oversample = p;
        self
    }

    pub fn with_drm(mut self, drm: DrmKind) -> Self {
        self.drm = drm;
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunStats {
    /// Oracle evaluations made by the run.
    pub eval_count: u64,
    pub counters: CounterSnapshot,
    pub warnings: Vec<String>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub tt: TtTensor,
    /// `(k, Q_k)`: orthonormal bases of the column spaces of `X_k`.
    pub left_bases: Vec<(usize, Matrix)>,
    /// `(k, P_k)`: orthonormal bases of the row spaces of `X_k`, stored
    /// as `N_{>k} × r_k`.
    pub right_bases: Vec<(usize, Matrix)>,
    pub stats: RunStats,
}

impl Decomposition {
    /// `‖(I − Q_k Q_kᵀ) reshape(Q_{k+1})‖_F` for consecutive left bases,
    /// then the mirrored quantity for consecutive right bases.
    pub fn nesting_residuals(&self) -> Result<Vec<f64>> {
        let dims = self.tt.dims();
        let mut out = Vec::new();
        for w in self.left_bases.windows(2) {
            let ((k, q), (k1, q1)) = (&w[0], &w[1]);
            if k + 1 != *k1 {
                continue;
            }
            let next = q1.clone().reshape(q.rows(), q1.len() / q.rows())?;
            out.push(projector_residual(q, &next)?);
        }
        for w in self.right_bases.windows(2) {
            let ((k, p), (k1, p1)) = (&w[0], &w[1]);
            if k + 1 != *k1 {
                continue;
            }
            // columns of P_k indexed by (i_{k+1}, J): gather the J-fibers
            let n = dims[*k];
            let rest = p1.rows();
            let mut m = Matrix::zeros(rest, n * p.cols());
            for a in 0..p.cols() {
                let col = p.column(a);
                for i in 0..n {
                    for j in 0..rest {
                        m[(j, i + n * a)] = col[i + n * j];
                    }
                }
            }
            out.push(projector_residual(p1, &m)?);
        }
        Ok(out)
    }
}

/// `‖(I − QQᵀ) M‖_F` for `Q` with orthonormal columns.
pub fn projector_residual(q: &Matrix, m: &Matrix) -> Result<f64> {
    Ok(m.sub(&q.matmul(&q.tr_matmul(m)?)?)?.frobenius_norm())
}

/// Per-run bookkeeping shared by the streaming methods.
pub(crate) struct Run<'a> {
    pub oracle: &'a dyn TensorOracle,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub partition: Partition,
    pub engine: SketchEngine,
    pub warnings: Vec<String>,
    start_evals: u64,
    start: Instant,
}

impl<'a> Run<'a> {
    pub fn new(oracle: &'a dyn TensorOracle, cfg: &DecomposeConfig) -> Result<Self> {
        let dims = oracle.shape().dims().to_vec();
        let d = dims.len();
        if d < 2 {
            return Err(Error::InvalidArgument("sketching methods need at least two modes".into()));
        }
        if cfg.ranks.len() != d - 1 || cfg.ranks.contains(&0) {
            return Err(Error::InvalidRanks(format!(
                "{d} modes need {} positive ranks, got {:?}",
                d - 1,
                cfg.ranks
            )));
        }
        if cfg.oversample < 2 {
            return Err(Error::InvalidArgument(format!("oversampling {} is below 2", cfg.oversample)));
        }
        if cfg.workers == 0 {
            return Err(Error::InvalidArgument("at least one worker is required".into()));
        }
        let partition = match &cfg.partition {
            Some(p) if p.dims() != dims.as_slice() => {
                return Err(Error::InvalidPartition(format!("partition dims {:?} vs tensor {:?}", p.dims(), dims)))
            }
            Some(p) => p.clone(),
            None => Partition::default_for(&dims),
        };
        let mut warnings = Vec::new();
        let ranks = (1..d)
            .map(|k| {
                let cap = dims[..k].iter().product::<usize>().min(dims[k..].iter().product());
                let r = cfg.ranks[k - 1];
                if r > cap {
                    warnings.push(format!("rank r_{k} = {r} clipped to the unfolding bound {cap}"));
                }
                r.min(cap)
            })
            .collect();
        let engine = SketchEngine {
            workers: cfg.workers,
            block_budget: cfg.block_budget,
            counters: CostCounters::new(cfg.workers),
        };
        Ok(Run {
            oracle,
            dims,
            ranks,
            partition,
            engine,
            warnings,
            start_evals: oracle.eval_count(),
            start: Instant::now(),
        })
    }

    pub fn counters(&self) -> &CostCounters {
        &self.engine.counters
    }

    pub fn note_rank(&mut self, label: &str, k: usize, got: usize) {
        let want = self.ranks[k - 1];
        if got < want {
            self.warnings.push(format!("{label} basis {k} has rank {got} < requested {want}"));
        }
    }

    pub fn finish(
        self,
        tt: TtTensor,
        left_bases: Vec<(usize, Matrix)>,
        right_bases: Vec<(usize, Matrix)>,
    ) -> Decomposition {
        self.engine.counters.end_phase();
        Decomposition {
            tt,
            left_bases,
            right_bases,
            stats: RunStats {
                eval_count: self.oracle.eval_count() - self.start_evals,
                counters: self.engine.counters.snapshot(),
                warnings: self.warnings,
                wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            },
        }
    }
}

/// Runs `method` on `oracle`. The SVD-based methods materialize the
/// tensor (one counted pass) and use `cfg.ranks` when given, else `cfg.tol`.
pub fn decompose(method: Method, oracle: &dyn TensorOracle, cfg: &DecomposeConfig) -> Result<Decomposition> {
    match method {
        Method::Pstt => pstt(oracle, cfg),
        Method::PsttOnepass => pstt_onepass(oracle, cfg),
        Method::Pstt2 => pstt2(oracle, cfg),
        Method::Pstt2Onepass => pstt2_onepass(oracle, cfg),
        Method::Sstt => sstt(oracle, cfg),
        Method::Ttsvd | Method::ParallelTtsvd => {
            let start = Instant::now();
            let evals = oracle.eval_count();
            let target = match (&cfg.ranks, cfg.tol) {
                (r, _) if !r.is_empty() => TtTarget::Ranks(r.clone()),
                (_, Some(t)) => TtTarget::Tol(t),
                _ => return Err(Error::InvalidArgument(format!("{method} needs ranks or a tolerance"))),
            };
            let x = oracle.materialize()?;
            let counters = CostCounters::new(1);
            counters.begin_phase("dense");
            let resident = counters.charge(0, x.values().len());
            let (tt, left_bases) = if method == Method::Ttsvd {
                let tt = ttsvd(&x, &target)?;
                let bases = (1..tt.order()).map(|k| Ok((k, tt.left_interface(k)?))).collect::<Result<_>>()?;
                (tt, bases)
            } else {
                let (tt, bases) = parallel_ttsvd_with_bases(&x, &target, cfg.workers)?;
                (tt, bases.into_iter().enumerate().map(|(k, b)| (k + 1, b)).collect())
            };
            drop(resident);
            counters.end_phase();
            Ok(Decomposition {
                tt,
                left_bases,
                right_bases: Vec::new(),
                stats: RunStats {
                    eval_count: oracle.eval_count() - evals,
                    counters: counters.snapshot(),
                    warnings: Vec::new(),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                },
            })
        }
    }
}
