use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ricci_lab::semigroup::{feynman_kac_mc, markov_kernel};
use ricci_lab::{CurvatureField, SpectralCache};
use ricci_lab_bench::ou;

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral");
    for n in [101, 401] {
        let s = ou(n, 5.0);
        g.bench_with_input(BenchmarkId::new("heat_cache", n), &n, |bch, _| {
            bch.iter(|| SpectralCache::heat(black_box(&s)).unwrap())
        });
        let cache = SpectralCache::heat(&s).unwrap();
        g.bench_with_input(BenchmarkId::new("markov_kernel", n), &n, |bch, _| {
            bch.iter(|| markov_kernel(&cache, black_box(0.1)).unwrap())
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let s = ou(41, 3.0);
    let k = CurvatureField::constant(41, 0.5);
    let u: Vec<f64> = (0..41).map(|i| (0.2 * i as f64).cos()).collect();
    c.bench_function("feynman_kac/41x1000", |bch| {
        bch.iter(|| feynman_kac_mc(&s, &k, black_box(&u), 0.2, 1000, 7).unwrap())
    });
}

criterion_group!(benches, spectral, monte_carlo);
criterion_main!(benches);
