use std::hint::black_box;

use caplab_bench::bench_grid;
use caplab_core::potentials::{maximal_function, riesz_potential};
use caplab_core::{solve_capacity, BallKind, CapacityProblem, FieldVector, PointSet};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn constant_one(n: usize) -> FieldVector {
    FieldVector::constant(n, 1.0)
}

fn bench_riesz_potential(c: &mut Criterion) {
    let mut group = c.benchmark_group("riesz_potential");
    for side in [9usize, 17, 33] {
        let space = bench_grid(side);
        let f = constant_one(space.len());
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| riesz_potential(black_box(&space), black_box(&f), 1.0, 0.0).unwrap())
        });
    }
    group.finish();
}

fn bench_maximal_function(c: &mut Criterion) {
    let mut group = c.benchmark_group("maximal_function");
    for side in [9usize, 17, 33] {
        let space = bench_grid(side);
        let f = constant_one(space.len());
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| maximal_function(black_box(&space), black_box(&f)).unwrap())
        });
    }
    group.finish();
}

/// Ball target and a surrounding host, the shape every scan solves repeatedly.
fn ball_problem(space: &caplab_core::FiniteMetricMeasureSpace) -> (PointSet, PointSet) {
    let center = space.len() / 2;
    let r = space.diam() / 8.0;
    let f = PointSet::new(space.ball_member_ids(center, r, BallKind::Closed));
    let omega =
        PointSet::new(space.ball_member_ids(center, 2.0 * r, BallKind::Open)).union(&f);
    (f, omega)
}

fn bench_capacity_solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("capacity");
    group.sample_size(10);
    for side in [9usize, 17] {
        let space = bench_grid(side);
        let (f, omega) = ball_problem(&space);
        group.bench_with_input(BenchmarkId::new("hajlasz", side), &side, |b, _| {
            b.iter(|| {
                solve_capacity(
                    black_box(&space),
                    &CapacityProblem::hajlasz(f.clone(), omega.clone(), 1.0, 2.0),
                )
                .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("riesz", side), &side, |b, _| {
            b.iter(|| {
                solve_capacity(black_box(&space), &CapacityProblem::riesz(f.clone(), 1.0, 2.0))
                    .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("content", side), &side, |b, _| {
            b.iter(|| {
                solve_capacity(
                    black_box(&space),
                    &CapacityProblem::content(f.clone(), 1.0, space.diam() / 8.0),
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_riesz_potential, bench_maximal_function, bench_capacity_solvers);
criterion_main!(benches);
