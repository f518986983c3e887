use proptest::prelude::*;
use ttstream_core::algorithms::{decompose, DecomposeConfig, Method};
use ttstream_core::convert::{tucker2tt, verify_rank_lemma};
use ttstream_core::generators::random_tt;
use ttstream_core::kernels::random::{gaussian_matrix, SeededStream};
use ttstream_core::kernels::svd::numerical_rank;
use ttstream_core::sketch::Partition;
use ttstream_core::sylvester::{lowrank_recompress, shift_count, zolotarev_shifts, Interval, LowRank};
use ttstream_core::tensor::{linear_index, refold};
use ttstream_core::tt::{ttsvd, TtTarget};
use ttstream_core::tucker::random_tucker;
use ttstream_core::{DenseTensor, Shape};

fn rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let d: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
    d.sqrt() / b.frobenius_norm()
}

fn noisy(dims: &[usize], seed: u64) -> DenseTensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let g = gaussian_matrix(shape.numel(), 1, SeededStream::new(seed, 5));
    let mut k = 0;
    DenseTensor::from_fn(shape, |idx| {
        k += 1;
        let s: usize = idx.iter().sum();
        1.0 / (1.0 + s as f64) + 1e-3 * g[(k - 1, 0)]
    })
}

/// Dims, TT ranks and partition counts of a small exact-rank problem.
fn tt_case() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>, u64)> {
    (3usize..=5)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(2usize..=6, d),
                prop::collection::vec(1usize..=3, d - 1),
                prop::collection::vec(1usize..=3, d),
                any::<u64>(),
            )
        })
        .prop_map(|(dims, ranks, counts, seed)| {
            let counts = counts.iter().zip(&dims).map(|(&c, &n)| c.min(n)).collect();
            (dims, ranks, counts, seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_index_is_a_bijection(dims in prop::collection::vec(1usize..=4, 1..=4)) {
        let shape = Shape::new(dims.clone()).unwrap();
        let mut seen = vec![false; shape.numel()];
        let mut idx = vec![1usize; dims.len()];
        for _ in 0..shape.numel() {
            let off = linear_index(&idx, &shape).unwrap();
            prop_assert!(!seen[off]);
            seen[off] = true;
            for (i, &n) in idx.iter_mut().zip(&dims) {
                *i += 1;
                if *i <= n {
                    break;
                }
                *i = 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn unfold_refold_roundtrip(dims in prop::collection::vec(1usize..=4, 2..=4), seed in any::<u64>()) {
        let x = noisy(&dims, seed);
        for k in 1..dims.len() {
            let m = x.unfold(k).unwrap();
            prop_assert!((m.frobenius_norm() - x.frobenius_norm()).abs() <= 1e-12 * x.frobenius_norm());
            prop_assert_eq!(&refold(m, x.shape()).unwrap(), &x);
        }
    }

    #[test]
    fn partition_blocks_tile_the_box(dims in prop::collection::vec(1usize..=7, 1..=4), raw in prop::collection::vec(1usize..=4, 4)) {
        let counts: Vec<usize> = dims.iter().zip(&raw).map(|(&n, &c)| c.min(n)).collect();
        let p = Partition::new(&dims, &counts).unwrap();
        prop_assert_eq!(p.num_blocks(), counts.iter().product::<usize>());
        let total: usize = (0..p.num_blocks()).map(|j| p.subtensor(j).len()).sum();
        prop_assert_eq!(total, dims.iter().product::<usize>());
    }

    #[test]
    fn exact_rank_recovery_and_counts((dims, ranks, counts, seed) in tt_case(), workers in 1usize..=4) {
        let x = random_tt(&dims, &ranks, seed).unwrap().full().unwrap();
        // requested ranks can exceed what the dims allow
        let ranks: Vec<usize> = (1..dims.len()).map(|k| numerical_rank(&x.unfold(k).unwrap(), 1e-12)).collect();
        let part = Partition::new(&dims, &counts).unwrap();
        let total = x.values().len() as u64;
        for method in [Method::PsttOnepass, Method::Pstt2, Method::Pstt2Onepass, Method::Sstt] {
            let oracle = x.as_oracle();
            let cfg = DecomposeConfig::new(ranks.clone()).with_partition(part.clone()).with_workers(workers).with_seed(seed);
            let dec = decompose(method, &oracle, &cfg).unwrap();
            prop_assert_eq!(dec.stats.eval_count, method.passes() * total);
            let err = rel(&dec.tt.full().unwrap(), &x);
            prop_assert!(err <= 1e-9, "{} error {:e}", method, err);
            prop_assert!(dec.nesting_residuals().unwrap().iter().all(|&r| r <= 1e-8));
        }
    }

    #[test]
    fn output_does_not_depend_on_worker_count((dims, ranks, counts, seed) in tt_case()) {
        let x = noisy(&dims, seed);
        let part = Partition::new(&dims, &counts).unwrap();
        for method in [Method::Pstt, Method::Pstt2Onepass, Method::Sstt] {
            let run = |c: usize| {
                let cfg = DecomposeConfig::new(ranks.clone()).with_partition(part.clone()).with_workers(c).with_seed(seed);
                decompose(method, &x.as_oracle(), &cfg).unwrap().tt
            };
            let one = run(1);
            prop_assert_eq!(&one, &run(3));
        }
    }

    #[test]
    fn ttsvd_meets_tolerance(dims in prop::collection::vec(2usize..=6, 2..=4), seed in any::<u64>(), exp in 1i32..=8) {
        let x = noisy(&dims, seed);
        let tol = 10f64.powi(-exp);
        let tt = ttsvd(&x, &TtTarget::Tol(tol)).unwrap();
        prop_assert!(rel(&tt.full().unwrap(), &x) <= tol);
    }

    #[test]
    fn tucker2tt_meets_tolerance_and_rank_lemma(
        dims in prop::collection::vec(3usize..=7, 3..=4),
        seed in any::<u64>(),
        exp in 2i32..=10,
    ) {
        let ranks: Vec<usize> = dims.iter().map(|&n| n - 1).collect();
        let t = random_tucker(&dims, &ranks, seed).unwrap();
        let tol = 10f64.powi(-exp);
        let tt = tucker2tt(&t, &TtTarget::Tol(tol)).unwrap();
        prop_assert!(rel(&tt.full().unwrap(), &t.full().unwrap()) <= tol);
        prop_assert!(verify_rank_lemma(&t).unwrap().holds());
    }

    #[test]
    fn shift_count_is_monotone(lo in 1e-4f64..0.5, hi in 0.6f64..10.0, exp in 1i32..=13) {
        let e = Interval::new(-hi, -lo).unwrap();
        let f = Interval::new(lo, hi).unwrap();
        let eps = 10f64.powi(-exp);
        let l = shift_count(e, f, eps).unwrap();
        prop_assert!(shift_count(e, f, eps / 2.0).unwrap() >= l);
        let s = zolotarev_shifts(e, f, eps).unwrap();
        prop_assert_eq!(s.len(), l);
        prop_assert!(s.bound() <= eps);
        prop_assert!(s.p.iter().all(|&p| e.contains(p)) && s.q.iter().all(|&q| f.contains(q)));
    }

    #[test]
    fn recompression_error_is_relative(rows in 4usize..=20, cols in 4usize..=20, k in 1usize..=6, seed in any::<u64>(), exp in 1i32..=12) {
        let w = gaussian_matrix(rows, k, SeededStream::new(seed, 1));
        let y = gaussian_matrix(cols, k, SeededStream::new(seed, 2));
        let mut d = gaussian_matrix(k, k, SeededStream::new(seed, 3));
        for i in 0..k {
            d[(i, i)] *= 10f64.powi(-(i as i32));
        }
        let lr = LowRank { w, d, y };
        let eps = 10f64.powi(-exp);
        let full = lr.to_dense().unwrap();
        let out = lowrank_recompress(&lr, eps).unwrap();
        let err = out.to_dense().unwrap().sub(&full).unwrap().frobenius_norm();
        prop_assert!(err <= eps * full.frobenius_norm() * (1.0 + 1e-9) + 1e-14);
        prop_assert!(out.rank() <= k.min(rows).min(cols));
    }
}
