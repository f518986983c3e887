use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use ttstream_core::algorithms::{decompose as run_method, DecomposeConfig, Method};
use ttstream_core::convert::{tt2tucker, tucker2tt, BasisMethod};
use ttstream_core::generators::{gaussian_bumps, hilbert};
use ttstream_core::io::{read_dense, read_info, read_tt, read_tucker, write_tt, write_tucker, FileInfo};
use ttstream_core::oracle::TensorOracle;
use ttstream_core::sketch::{DrmKind, Partition};
use ttstream_core::sylvester::{demo_problem, direct_solve, tt_fadi, NormalOperator, Sylvester3DProblem};
use ttstream_core::tt::{tt_error, ErrorMode, TtTarget};
use ttstream_core::tucker::TuckerTarget;
use ttstream_core::{DenseTensor, Matrix};

use crate::report::Report;
use crate::{BasisArg, ConvertArgs, DecomposeArgs, Direction, DrmArg, InfoArgs, SylvesterArgs, TensorKind};

/// Tensors up to this many scalars are verified in full by default.
const FULL_VERIFY_LIMIT: usize = 1 << 24;
const DEFAULT_SAMPLES: usize = 100_000;

fn rel_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let d: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
    let n = b.frobenius_norm();
    if n == 0.0 {
        d.sqrt()
    } else {
        d.sqrt() / n
    }
}

fn verify_mode(spec: &str, numel: usize, seed: u64) -> Result<Option<ErrorMode>> {
    Ok(match spec {
        "none" => None,
        "full" => Some(ErrorMode::Full),
        "auto" if numel <= FULL_VERIFY_LIMIT => Some(ErrorMode::Full),
        "auto" => Some(ErrorMode::Sample { samples: DEFAULT_SAMPLES, seed }),
        s => match s.strip_prefix("sample:") {
            Some(n) => Some(ErrorMode::Sample { samples: n.parse().context("sample count")?, seed }),
            None => bail!("--verify expects auto, none, full or sample:N, got {s:?}"),
        },
    })
}

fn input_path(a: &DecomposeArgs) -> Result<&Path> {
    a.input.as_deref().context("--input is required for file tensors")
}

/// Runs `f` on the oracle named by the arguments.
fn with_source<R>(a: &DecomposeArgs, f: impl FnOnce(&dyn TensorOracle) -> Result<R>) -> Result<R> {
    match a.tensor {
        TensorKind::Hilbert => f(&hilbert(&a.dims)?),
        TensorKind::GaussianBumps => f(&gaussian_bumps(&a.dims, a.bumps, a.gamma, a.data_seed)?),
        TensorKind::Dense => {
            let x = read_dense(input_path(a)?)?;
            f(&x.as_oracle())
        }
        TensorKind::Tt => {
            let t = read_tt(input_path(a)?)?;
            f(&t.as_oracle())
        }
    }
}

pub fn decompose(a: &DecomposeArgs) -> Result<Report> {
    let method: Method = a.method.parse()?;
    with_source(a, |oracle| {
        let dims = oracle.shape().dims().to_vec();
        let partition = if a.partition.is_empty() {
            Partition::default_for(&dims)
        } else {
            Partition::new(&dims, &a.partition)?
        };
        let mut cfg = DecomposeConfig::new(a.ranks.clone())
            .with_oversample(a.oversample)
            .with_workers(a.workers)
            .with_seed(a.seed)
            .with_partition(partition.clone())
            .with_drm(match a.drm {
                DrmArg::KhatriRao => DrmKind::KhatriRao,
                DrmArg::Gaussian => DrmKind::Gaussian,
            });
        cfg.tol = a.tol;
        cfg.middle = a.middle;
        cfg.block_budget = a.block_budget;

        let dec = run_method(method, oracle, &cfg)?;
        if let Some(out) = &a.output {
            write_tt(out, &dec.tt)?;
        }
        let stats = &dec.stats;
        let mut r = Report::new();
        r.set("method", method.name())
            .set("tensor", format!("{:?}", a.tensor).to_lowercase())
            .set("dims", &dims)
            .set("ranks", &a.ranks)
            .set("core_sizes", dec.tt.core_sizes())
            .set("oversample", a.oversample)
            .set("partition", partition.counts())
            .set("workers", a.workers)
            .set("seed", a.seed)
            .set("drm", format!("{:?}", a.drm).to_lowercase())
            .set("eval_count", stats.eval_count)
            .set("per_worker_peak_scalars", &stats.counters.per_worker_peak)
            .set("message_count", stats.counters.messages)
            .set("message_volume", stats.counters.message_volume)
            .set("flops", stats.counters.flops)
            .set("wall_time_ms", stats.wall_ms)
            .set("warnings", &stats.warnings)
            .set("tol", a.tol)
            .set("output", a.output.as_ref().map(|p| p.display().to_string()));

        let numel: usize = dims.iter().product();
        match verify_mode(&a.verify, numel, a.seed)? {
            Some(mode) => {
                let est = tt_error(oracle, &dec.tt, mode)?;
                let (name, samples) = match mode {
                    ErrorMode::Full => ("full", None),
                    ErrorMode::Sample { samples, .. } => ("sample", Some(samples)),
                };
                let verified = a.tol.is_none_or(|t| est.relative_error <= t);
                r.set("relative_error", est.relative_error)
                    .set("error_mode", name)
                    .set("samples", samples)
                    .set("std_error", est.std_error)
                    .set("verified", verified);
                if !verified {
                    r.fail();
                }
            }
            None => {
                r.set("relative_error", None::<f64>).set("error_mode", "none");
            }
        }
        Ok(r)
    })
}

pub fn convert(a: &ConvertArgs) -> Result<Report> {
    let mut r = Report::new();
    r.set("direction", format!("{:?}", a.direction).to_lowercase())
        .set("input", a.input.display().to_string())
        .set("output", a.output.display().to_string())
        .set("tol", a.tol)
        .set("ranks", &a.ranks);
    match a.direction {
        Direction::Tucker2tt => {
            let t = read_tucker(&a.input)?;
            let target = match (a.tol, a.ranks.is_empty()) {
                (_, false) => TtTarget::Ranks(a.ranks.clone()),
                (Some(tol), true) => TtTarget::Tol(tol),
                (None, true) => bail!("tucker2tt needs --tol or --ranks"),
            };
            let tt = tucker2tt(&t, &target)?;
            write_tt(&a.output, &tt)?;
            r.set("dims", t.dims()).set("core_sizes", tt.core_sizes());
            let err = (t.dims().iter().product::<usize>() <= FULL_VERIFY_LIMIT)
                .then(|| Ok::<_, anyhow::Error>(rel_diff(&tt.full()?, &t.full()?)))
                .transpose()?;
            r.set("relative_error", err);
        }
        Direction::Tt2tucker => {
            let tt = read_tt(&a.input)?;
            let target = match (a.tol, a.ranks.is_empty()) {
                (_, false) => TuckerTarget::Ranks(a.ranks.clone()),
                (Some(tol), true) => TuckerTarget::Tol(tol),
                (None, true) => bail!("tt2tucker needs --tol or --ranks"),
            };
            let basis = match a.basis {
                BasisArg::Svd => BasisMethod::Svd,
                BasisArg::Cpqr => BasisMethod::Cpqr,
            };
            let out = tt2tucker(&tt, &target, basis)?;
            let tucker = out.to_tucker()?;
            write_tucker(&a.output, &tucker)?;
            r.set("dims", tt.dims())
                .set("tucker_ranks", out.factors.iter().map(Matrix::cols).collect::<Vec<_>>())
                .set("core_tt_sizes", out.core.core_sizes())
                .set("basis", format!("{:?}", a.basis).to_lowercase())
                .set("span_mismatch", &out.span_mismatch);
            let warnings: Vec<String> = out
                .span_mismatch
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > 1e-8)
                .map(|(j, s)| format!("core {} does not span the mode-{} unfolding (sine {s:.3e}); input ranks are not optimal", j + 1, j + 1))
                .collect();
            r.set("warnings", warnings);
            let err = (tt.dims().iter().product::<usize>() <= FULL_VERIFY_LIMIT)
                .then(|| Ok::<_, anyhow::Error>(rel_diff(&tucker.full()?, &tt.full()?)))
                .transpose()?;
            r.set("relative_error", err);
        }
    }
    Ok(r)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorSpec {
    eigenvalues: Option<Vec<f64>>,
    /// DTF1 file holding a symmetric matrix.
    matrix: Option<PathBuf>,
    interval: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoSpec {
    n: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    demo: Option<DemoSpec>,
    a: Option<OperatorSpec>,
    b: Option<OperatorSpec>,
    c: Option<OperatorSpec>,
    /// TTF1 file with the right-hand side.
    rhs: Option<PathBuf>,
    eps: Option<f64>,
}

fn operator(spec: &OperatorSpec, base: &Path) -> Result<NormalOperator> {
    let op = match (&spec.eigenvalues, &spec.matrix) {
        (Some(v), None) => NormalOperator::diagonal(v.clone())?,
        (None, Some(p)) => {
            let t = read_dense(&base.join(p))?;
            if t.dims().len() != 2 {
                bail!("operator file {} is not a matrix", p.display());
            }
            NormalOperator::symmetric(&t.unfold(1)?)?
        }
        _ => bail!("an operator needs exactly one of \"eigenvalues\" and \"matrix\""),
    };
    Ok(match spec.interval {
        Some([lo, hi]) => op.with_interval(ttstream_core::sylvester::Interval::new(lo, hi)?)?,
        None => op,
    })
}

fn load_problem(path: &Path) -> Result<(Sylvester3DProblem, Option<f64>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ProblemFile = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let problem = match (&file.demo, &file.a, &file.b, &file.c, &file.rhs) {
        (Some(d), None, None, None, None) => demo_problem(d.n, d.seed)?,
        (None, Some(a), Some(b), Some(c), Some(rhs)) => Sylvester3DProblem::new(
            operator(a, base)?,
            operator(b, base)?,
            operator(c, base)?,
            read_tt(&base.join(rhs))?,
        )?,
        _ => bail!("a problem file needs either \"demo\" or all of \"a\", \"b\", \"c\" and \"rhs\""),
    };
    Ok((problem, file.eps))
}

pub fn solve_sylvester(a: &SylvesterArgs) -> Result<Report> {
    let (problem, file_eps) = load_problem(&a.problem)?;
    let eps = a.eps.or(file_eps).unwrap_or(1e-9);
    let start = Instant::now();
    let sol = tt_fadi(&problem, eps)?;
    let wall = start.elapsed().as_secs_f64() * 1e3;
    if let Some(out) = &a.output {
        write_tt(out, &sol.tt)?;
    }
    let dims = problem.dims();
    let small = dims.iter().product::<usize>() <= FULL_VERIFY_LIMIT;
    let residual = small.then(|| problem.relative_residual(&sol.tt)).transpose()?;
    let diagonal = problem.a.is_diagonal() && problem.b.is_diagonal() && problem.c.is_diagonal();
    let direct = (small && diagonal)
        .then(|| Ok::<_, anyhow::Error>(rel_diff(&sol.tt.full()?, &direct_solve(&problem)?)))
        .transpose()?;
    let s = &sol.stats;
    let mut r = Report::new();
    r.set("dims", dims)
        .set("eps", eps)
        .set("ell", sol.shifts.len())
        .set("predicted_bound", sol.shifts.bound())
        .set("shift_interval_e", [sol.shifts.e.lo, sol.shifts.e.hi])
        .set("shift_interval_f", [sol.shifts.f.lo, sol.shifts.f.hi])
        .set("core_sizes", sol.tt.core_sizes())
        .set("residual", residual)
        .set("direct_relative_error", direct)
        .set("z_solves", s.z_solves)
        .set("w_solves", s.w_solves)
        .set("y_solves", s.y_solves)
        .set("solve_ops", s.solve_ops)
        .set("total_ops", s.total_ops)
        .set("peak_resident_scalars", s.peak_resident)
        .set("largest_array", s.largest_array)
        .set("warnings", &s.warnings)
        .set("wall_time_ms", wall)
        .set("output", a.output.as_ref().map(|p| p.display().to_string()));
    Ok(r)
}

pub fn info(a: &InfoArgs) -> Result<Report> {
    let mut r = Report::new();
    r.set("path", a.path.display().to_string());
    match read_info(&a.path)? {
        FileInfo::Dense { dims } => {
            r.set("format", "DTF1").set("dims", dims);
        }
        FileInfo::Tt { dims, core_sizes, storage } => {
            r.set("format", "TTF1").set("dims", dims).set("core_sizes", core_sizes).set("storage", storage);
        }
        FileInfo::Tucker { dims, core_dims } => {
            r.set("format", "TKF1").set("dims", dims).set("core_dims", core_dims);
        }
    }
    Ok(r)
}
