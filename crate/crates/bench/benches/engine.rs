use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pointer_anneal::engine::{run, segment_propagator};
use pointer_anneal::{dense, SimParams};

fn bench_segment(c: &mut Criterion) {
    let p = SimParams::new(0.25, 1024).unwrap();
    c.bench_function("segment_propagator/n=1024", |b| {
        b.iter(|| segment_propagator(black_box(512), &p).unwrap())
    });
}

fn bench_run(c: &mut Criterion) {
    let mut g = c.benchmark_group("engine_run");
    g.sample_size(10);
    for n in [1usize << 10, 1 << 14] {
        let p = SimParams::new(0.125, n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| run(p, p.n_qubits).unwrap().final_p1)
        });
    }
    g.finish();
}

fn bench_dense(c: &mut Criterion) {
    let p = SimParams::new(0.5, 8).unwrap();
    let times = [p.t_final];
    let mut g = c.benchmark_group("dense_oracle");
    g.sample_size(10);
    g.bench_function("n=8", |b| {
        b.iter(|| dense::evolve_full(&p, &times).unwrap().report.substeps)
    });
    g.finish();
}

criterion_group!(benches, bench_segment, bench_run, bench_dense);
criterion_main!(benches);
