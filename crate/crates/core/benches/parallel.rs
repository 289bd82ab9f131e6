use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mrgark::exec::{self, Execution};
use mrgark::integrator::SolverConfig;
use mrgark::monotonicity::{am_radius, R_MAX, RADIUS_TOL};
use mrgark::order::observed_order;
use mrgark::problems::linear2;
use mrgark::schemes::{make, CATALOG};

fn convergence(c: &mut Criterion) {
    let scheme = make("mrk-radau1a-3", 4).unwrap();
    let ivp = linear2();
    let steps = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125];
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("convergence-study");
    for (label, mode) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(label, |b| {
            b.iter(|| observed_order(scheme.stepper(), &ivp, black_box(&steps), 1.0, &cfg, mode).unwrap())
        });
    }
    group.finish();
}

fn radius_scan(c: &mut Criterion) {
    let flats: Vec<_> = CATALOG
        .iter()
        .flat_map(|e| (1..=4).map(move |m| make(e.name, m).unwrap().flat()))
        .collect();
    let mut group = c.benchmark_group("catalog-radius-scan");
    for (label, mode) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(label, |b| {
            b.iter(|| exec::map(mode, black_box(&flats), |f| am_radius(f, R_MAX, RADIUS_TOL).radius))
        });
    }
    group.finish();
}

criterion_group!(benches, convergence, radius_scan);
criterion_main!(benches);
