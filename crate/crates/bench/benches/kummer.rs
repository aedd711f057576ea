use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cmnoise_bench::{equilibrium_grid, moderate};
use cmnoise_core::{equilibrium_pdf_third, hyp1f1};

fn hyp(c: &mut Criterion) {
    let mut group = c.benchmark_group("hyp1f1");
    // series, Kummer-transformed series and asymptotic regimes
    for (label, z) in [("series", 2.5), ("transformed", -25.0), ("asymptotic", -900.0)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &z, |b, &z| {
            b.iter(|| hyp1f1(black_box(1.25), black_box(2.75), black_box(z)))
        });
    }
    group.finish();
}

fn equilibrium(c: &mut Criterion) {
    let (p, s) = moderate();
    let grid = equilibrium_grid();
    c.bench_function("equilibrium_pdf_third", |b| b.iter(|| equilibrium_pdf_third(&s, &p, black_box(&grid)).unwrap()));
}

criterion_group!(benches, hyp, equilibrium);
criterion_main!(benches);
