//! Sequential vs. parallel execution of the data-parallel kernels.
//!
//! Run with `cargo bench -p miadmm`; build with `--no-default-features` to
//! see both policies collapse to the sequential path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use miadmm::numerics::gram_with;
use miadmm::problems::{build_nmf_problem_with, build_synthetic_problem, gen_synthetic, NmfProblem};
use miadmm::{run, solve_batch, ExecPolicy, Matrix, ProblemSpec, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, ExecPolicy); 2] = [
    ("sequential", ExecPolicy::Sequential),
    ("parallel", ExecPolicy::Parallel),
];

fn uniform(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
}

fn bench_gram(c: &mut Criterion) {
    let mut group = c.benchmark_group("gram");
    for n in [100, 300] {
        let a = uniform(2 * n, n, 1);
        for (name, policy) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &a, |b, a| {
                b.iter(|| gram_with(black_box(a), policy))
            });
        }
    }
    group.finish();
}

fn bench_nmf(c: &mut Criterion) {
    let mut group = c.benchmark_group("nmf_10_iterations");
    group.sample_size(20);
    let u = uniform(120, 4, 2).matmul(&uniform(4, 100, 3));
    let p = NmfProblem { u, rank: 4 };
    let cfg = SolverConfig {
        rho: 0.1,
        max_iter: 10,
        tol: 1e-300,
        record_timing: false,
        ..Default::default()
    };
    for (name, policy) in POLICIES {
        let spec = build_nmf_problem_with(&p, policy).unwrap();
        group.bench_function(name, |b| b.iter(|| run(black_box(&spec), &cfg).unwrap()));
    }
    group.finish();
}

fn bench_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_8_seeds");
    group.sample_size(10);
    let specs: Vec<ProblemSpec> = (0..8)
        .map(|s| build_synthetic_problem(&gen_synthetic(100, 20, 0.1, s).unwrap(), 1.0).unwrap())
        .collect();
    let cfg = SolverConfig {
        rho: 0.1,
        max_iter: 50,
        record_timing: false,
        ..Default::default()
    };
    for (name, policy) in POLICIES {
        group.bench_function(name, |b| b.iter(|| solve_batch(black_box(&specs), &cfg, policy)));
    }
    group.finish();
}

criterion_group!(benches, bench_gram, bench_nmf, bench_batch);
criterion_main!(benches);
