use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use osmc::estimators::{empirical_target, solve_factored};
use osmc::matcore::svd_truncated;
use osmc::{DenseMatrix, Rng, SolverConfig};
use osmc_bench::observed_gaussian;

fn svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd_truncated");
    for &(d, r) in &[(50usize, 4usize), (100, 25), (200, 10)] {
        let mut rng = Rng::new(1);
        let mut a = DenseMatrix::from_fn(d, d, |_, _| rng.normal());
        a.symmetrize();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{d}x{d}_r{r}")), &a, |b, a| {
            b.iter(|| svd_truncated(black_box(a), r).unwrap())
        });
    }
    group.finish();
}

fn target(c: &mut Criterion) {
    let x = observed_gaussian(100_000, 100, 25, 2, 2);
    c.bench_function("empirical_target_m1e5_d100_k2", |b| b.iter(|| empirical_target(black_box(&x))));
}

fn factored(c: &mut Criterion) {
    let t = empirical_target(&observed_gaussian(20_000, 50, 4, 2, 3));
    let cfg = SolverConfig {
        rank: 4,
        steps: 500,
        ..SolverConfig::default()
    };
    c.bench_function("solve_factored_d50_r4_500steps", |b| {
        b.iter(|| solve_factored(black_box(&t), &cfg, &mut Rng::new(4)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = svd, target, factored
}
criterion_main!(benches);
