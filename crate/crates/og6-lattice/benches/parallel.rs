//! The rayon pool against a single worker on the data-parallel kernels. Built
//! without the `parallel` feature both variants run the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use og6_lattice::embed::filter_embeddable;
use og6_lattice::genus::enumerate_m_elementary;
use og6_lattice::isometry::{isometries_matching, DiscScope, IsometryConstraints};
use og6_lattice::lattice::{a, bl, d};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let n = rayon::current_num_threads();
    let mut out = vec![("1".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if n > 1 {
        out.push((n.to_string(), rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()));
    }
    out
}

fn bench(c: &mut Criterion) {
    let pools = pools();

    let mut g = c.benchmark_group("enumerate 2-elementary rank <= 5");
    g.sample_size(10);
    for (label, pool) in &pools {
        g.bench_with_input(BenchmarkId::from_parameter(label), pool, |b, pool| {
            b.iter(|| pool.install(|| enumerate_m_elementary(2, 5).unwrap()))
        });
    }
    g.finish();

    let cands = enumerate_m_elementary(2, 5).unwrap();
    let host = bl();
    let mut g = c.benchmark_group("embeddability into the host");
    g.sample_size(10);
    for (label, pool) in &pools {
        g.bench_with_input(BenchmarkId::from_parameter(label), pool, |b, pool| {
            b.iter(|| pool.install(|| filter_embeddable(&cands, &host).unwrap()))
        });
    }
    g.finish();

    let d4 = d(4).unwrap();
    let a4 = a(4).unwrap();
    let cons = IsometryConstraints { order: 5, fixed_rank: Some(0), disc: DiscScope::Trivial };
    let cons3 = IsometryConstraints { order: 3, ..cons.clone() };
    let mut g = c.benchmark_group("fixed-point-free isometries of order 5 or 3");
    g.sample_size(10);
    for (label, pool) in &pools {
        g.bench_with_input(BenchmarkId::new("A4 order 5", label), pool, |b, pool| {
            b.iter(|| pool.install(|| isometries_matching(&a4, &cons).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("D4 order 3", label), pool, |b, pool| {
            b.iter(|| pool.install(|| isometries_matching(&d4, &cons3).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
