use std::hint::black_box;

use adamlab::lemma::verify_cells;
use adamlab::{fuzz_search, region_grid, run_trace, GradientSource, HyperParams, LemmaId, DEFAULT_TOLERANCE};
use adamlab_bench::{lemma_cells, small_search};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn trajectory(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_trace");
    let h = HyperParams::fig1();
    for horizon in [200usize, 10_000] {
        group.bench_with_input(BenchmarkId::from_parameter(horizon), &horizon, |b, &n| {
            b.iter(|| run_trace(black_box(&h), &GradientSource::InvSqrt, n).unwrap())
        });
    }
    group.finish();
}

fn region(c: &mut Criterion) {
    c.bench_function("region_grid/100", |b| b.iter(|| region_grid(black_box(100)).unwrap()));
}

fn lemmas(c: &mut Criterion) {
    let cells = lemma_cells(64, 500);
    let ids = [LemmaId::L31, LemmaId::L32, LemmaId::NormMhat, LemmaId::NormMu];
    c.bench_function("verify_cells/64x500", |b| {
        b.iter(|| verify_cells(black_box(&cells), &ids, DEFAULT_TOLERANCE).unwrap())
    });
}

fn search(c: &mut Criterion) {
    let s = small_search(32);
    c.bench_function("fuzz_search/32x1000", |b| b.iter(|| fuzz_search(black_box(&s)).unwrap()));
}

criterion_group!(benches, trajectory, region, lemmas, search);
criterion_main!(benches);
