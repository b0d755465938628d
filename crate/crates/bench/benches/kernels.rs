use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use geominimax_bench::{bilinear, quadratic, robust_pca, spd_matrix, spd_pair};
use geominimax_core::linalg::{sym_eig, sym_fun, MatrixFunction};
use geominimax_core::problems::{joint_gradient, MinimaxProblem};
use geominimax_core::solvers::{rceg_step, SolverState};
use geominimax_core::Manifold;

fn bench_linalg(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    for n in [5, 10, 25, 50] {
        let a = spd_matrix(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| b.iter(|| sym_eig(black_box(a))));
    }
    group.finish();

    let a = spd_matrix(10, 2);
    c.bench_function("sym_fun/log/10", |b| b.iter(|| sym_fun(black_box(&a), MatrixFunction::Log)));
}

fn bench_spd(c: &mut Criterion) {
    let mut group = c.benchmark_group("spd");
    for n in [5, 10, 25] {
        let (m, x, y) = spd_pair(n, 3);
        let v = m.log_map(&x, &y).unwrap();
        group.bench_with_input(BenchmarkId::new("log_map", n), &n, |b, _| b.iter(|| m.log_map(black_box(&x), black_box(&y))));
        group.bench_with_input(BenchmarkId::new("exp_map", n), &n, |b, _| b.iter(|| m.exp_map(black_box(&x), black_box(&v))));
        group.bench_with_input(BenchmarkId::new("parallel_transport", n), &n, |b, _| {
            b.iter(|| m.parallel_transport(black_box(&x), black_box(&y), black_box(&v)))
        });
    }
    group.finish();
}

fn bench_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("rceg_step");
    let (p, start) = quadratic(50, 4);
    let s = SolverState::new(start, 0.01).unwrap();
    group.bench_function("euclidean_quadratic/50", |b| b.iter(|| rceg_step(&p, black_box(&s))));

    let (p, start) = bilinear(5, 5);
    let s = SolverState::new(start, 0.2).unwrap();
    group.bench_function("spd_bilinear/5", |b| b.iter(|| rceg_step(&p, black_box(&s))));

    let (p, start) = robust_pca(10, 8, 6);
    let s = SolverState::new(start, 0.02).unwrap();
    group.bench_function("robust_pca/10", |b| b.iter(|| rceg_step(&p, black_box(&s))));
    group.finish();

    let (p, start) = robust_pca(10, 8, 6);
    let (x, y) = start.split().unwrap();
    c.bench_function("robust_pca/value/10", |b| b.iter(|| p.value(black_box(x), black_box(y))));
    c.bench_function("robust_pca/joint_gradient/10", |b| b.iter(|| joint_gradient(&p, black_box(&start))));
}

criterion_group!(kernels, bench_linalg, bench_spd, bench_steps);
criterion_main!(kernels);
