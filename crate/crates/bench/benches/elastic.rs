use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fdasynth_bench::{aligner, matrix, toy};
use fdasynth_core::elastic::srvfs_of;

fn align(c: &mut Criterion) {
    let mut group = c.benchmark_group("align_pair");
    for m in [51, 101, 201] {
        let data = toy(1, m);
        let q = srvfs_of(&data.curves);
        let a = aligner(m);
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| a.distance(&q[0], &q[1]))
        });
    }
    group.finish();
}

fn matrix_12(c: &mut Criterion) {
    let data = toy(6, 101);
    let mut group = c.benchmark_group("distance_matrix");
    group.sample_size(10);
    group.bench_function("12_curves_m101", |b| b.iter(|| matrix(&data, 0.5)));
    group.finish();
}

criterion_group!(benches, align, matrix_12);
criterion_main!(benches);
