use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sareg::estim::{linspace, nw_fit, standard_normal_grid};
use sareg::plugin::{estimate_functionals, select_bandwidth};
use sareg::sim::{generate, Model};
use sareg::{gaussian_kernel, Estimator, GsSequence, RecursiveState, StepsizeConfig};

fn update(c: &mut Criterion) {
    let k = gaussian_kernel();
    let data = generate(Model::Cos, 0.5, 1000, 1).unwrap();
    let h = GsSequence::new(1.0, -0.2).unwrap();
    let mut group = c.benchmark_group("update");
    for grid_size in [1usize, 101, 1001] {
        group.bench_with_input(BenchmarkId::from_parameter(grid_size), &grid_size, |b, &m| {
            let grid = linspace(-3.0, 3.0, m);
            b.iter(|| {
                let mut s = RecursiveState::new(grid.clone(), StepsizeConfig::standard(Estimator::Recursive1), h, k.clone()).unwrap();
                s.extend(black_box(&data)).unwrap();
                black_box(s.regression())
            })
        });
    }
    group.finish();
}

fn nadaraya_watson(c: &mut Criterion) {
    let k = gaussian_kernel();
    let grid = standard_normal_grid();
    let mut group = c.benchmark_group("nw_fit");
    for n in [100usize, 500, 2000] {
        let data = generate(Model::Logistic, 0.5, n, 2).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| nw_fit(black_box(d), 0.4, &grid, &k).unwrap())
        });
    }
    group.finish();
}

fn functionals(c: &mut Criterion) {
    let k = gaussian_kernel();
    let data = generate(Model::Cos, 0.1, 200, 3).unwrap();
    let mut group = c.benchmark_group("functionals_n200");
    for e in [Estimator::NadarayaWatson, Estimator::Recursive1, Estimator::Recursive4] {
        group.bench_function(e.label(), |b| b.iter(|| estimate_functionals(black_box(&data), e, 0.2, &k).unwrap()));
    }
    group.finish();
    c.bench_function("select_bandwidth_rec1_n200", |b| {
        b.iter(|| select_bandwidth(black_box(&data), Estimator::Recursive1, 0.2, &k).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = update, nadaraya_watson, functionals
}
criterion_main!(benches);
