use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use cmnoise_bench::{moderate, nd_model};
use cmnoise_core::ndim::nd_coefficients;
use cmnoise_core::pde::{build_generator, evolve, gaussian_initial};
use cmnoise_core::sde::integrate_trajectory;
use cmnoise_core::{flux_coefficients, EvolveConfig, Grid, SimConfig};

fn sde(c: &mut Criterion) {
    let (p, _) = moderate();
    let cfg = SimConfig::defaults(&p, 1.0, 2, 100, 7);
    let steps = (cfg.t_end / cfg.dt).round() as u64;
    let mut group = c.benchmark_group("sde");
    group.throughput(Throughput::Elements(steps));
    group.bench_function("trajectory", |b| {
        let mut index = 0;
        b.iter(|| {
            index += 1;
            integrate_trajectory(&p, &cfg, black_box(index)).unwrap()
        })
    });
    group.finish();
}

fn pde(c: &mut Criterion) {
    let (p, s) = moderate();
    let mut group = c.benchmark_group("pde_100_steps");
    for cells in [512usize, 2048, 8192] {
        let grid = Grid::symmetric(30.0, cells).unwrap();
        let gen = build_generator(flux_coefficients(&s, &p), &grid).unwrap();
        let p0 = gaussian_initial(&grid, 1.0).unwrap();
        let cfg = EvolveConfig::new(0.01, 1.0);
        group.throughput(Throughput::Elements(cells as u64));
        group.bench_with_input(BenchmarkId::from_parameter(cells), &cells, |b, _| b.iter(|| evolve(&p0, &gen, &cfg).unwrap()));
    }
    group.finish();
}

fn ndim(c: &mut Criterion) {
    let mut group = c.benchmark_group("nd_coefficients");
    group.sample_size(20);
    for n in [1usize, 2, 4, 8] {
        let model = nd_model(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &model, |b, m| b.iter(|| nd_coefficients(m).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, sde, pde, ndim);
criterion_main!(benches);
