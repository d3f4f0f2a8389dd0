use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use axifree_bench::{grid, pinch};
use axifree_core::elliptic::{EllipticSolver, PressureCoefficients};
use axifree_core::grid::Parity;
use axifree_core::kinematics::{random_smooth_map, GeomCache};
use axifree_core::mollifier::MollifierKernel;

fn stencils(c: &mut Criterion) {
    let mut group = c.benchmark_group("stencils");
    for n in [32, 128] {
        let g = grid(n);
        let f = g.field_from_fn(Parity::Even, |r, z| (1.0 - r * r) * (2.0 * z).cos());
        group.bench_with_input(BenchmarkId::new("d_r", n), &f, |b, f| b.iter(|| g.d_r(black_box(f))));
        group.bench_with_input(BenchmarkId::new("d_z", n), &f, |b, f| b.iter(|| g.d_z(black_box(f))));
    }
    group.finish();
}

fn mollifier(c: &mut Criterion) {
    let mut group = c.benchmark_group("mollifier");
    for n in [64, 256] {
        let g = grid(n);
        let kernel = MollifierKernel::new(4.0 * g.dz, &g).unwrap();
        let f = g.boundary_from_fn(|z| (3.0 * z).sin() + 0.2 * (7.0 * z).cos());
        group.bench_with_input(BenchmarkId::new("apply", n), &f, |b, f| b.iter(|| kernel.apply(black_box(f))));
    }
    group.finish();
}

fn elliptic(c: &mut Criterion) {
    let mut group = c.benchmark_group("elliptic");
    group.sample_size(20);
    for n in [32, 64] {
        let g = grid(n);
        let solver = EllipticSolver::new(&g, 1e-10);
        let coeffs = PressureCoefficients::identity(&g);
        let source = g.field_from_fn(Parity::Even, |r, z| r * r * z.cos());
        let wall = g.boundary_from_fn(|z| 1.0 + 0.1 * (2.0 * z).sin());
        group.bench_function(BenchmarkId::new("pressure_solve", n), |b| {
            b.iter(|| solver.solve_pressure_source(&coeffs, black_box(&source), &wall).unwrap())
        });
        let map = random_smooth_map(&g, 7, 0.02);
        let kernel = MollifierKernel::new(4.0 * g.dz, &g).unwrap();
        group.bench_function(BenchmarkId::new("geometry_cache", n), |b| {
            b.iter(|| GeomCache::build(&g, black_box(&map), &kernel, &solver).unwrap())
        });
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    group.sample_size(10);
    for n in [16, 32] {
        let (_, model, state) = pinch(n);
        group.bench_function(BenchmarkId::new("rk4", n), |b| b.iter(|| model.step(black_box(&state), 1e-3).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, stencils, mollifier, elliptic, step);
criterion_main!(benches);
