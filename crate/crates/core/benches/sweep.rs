use criterion::{criterion_group, criterion_main, Criterion};
use goebel_core::solver::{sweep, BoundPolicy};

fn bench_sweep(c: &mut Criterion) {
    let policy = BoundPolicy::default();
    let mut group = c.benchmark_group("sweep_k2_200");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| sweep(2, 200, 2, policy, 1)));
    group.bench_function("parallel", |b| b.iter(|| sweep(2, 200, 2, policy, 0)));
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
