use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ricci_lab::coupling::sample_coupled_paths;
use ricci_lab::{CoupledKernel, CouplingPlan};
use ricci_lab_bench::ou;

fn kernel(c: &mut Criterion) {
    let mut g = c.benchmark_group("coupled_kernel");
    g.sample_size(10);
    for n in [21, 41] {
        let s = ou(n, 5.0);
        g.bench_with_input(BenchmarkId::new("build", n), &n, |bch, _| {
            bch.iter(|| CoupledKernel::build(black_box(&s), 1.0, 2f64.powi(-7), 1e-3).unwrap())
        });
    }
    let s = ou(21, 5.0);
    let q = CoupledKernel::build(&s, 1.0, 2f64.powi(-7), 1e-3).unwrap();
    g.bench_function("compose/21x64", |bch| bch.iter(|| q.compose(black_box(64), 2500).unwrap()));
    let alpha = CouplingPlan::new(21, 21, vec![(0, 20, 1.0)]);
    g.bench_function("sample/21x256", |bch| {
        bch.iter(|| sample_coupled_paths(&q, &alpha, 0.5, black_box(256), 3).unwrap())
    });
    g.finish();
}

criterion_group!(benches, kernel);
criterion_main!(benches);
