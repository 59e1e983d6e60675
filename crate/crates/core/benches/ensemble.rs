use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ckmc::coupling::{CoupledSetup, Scheme};
use ckmc::engine::TimeGrid;
use ckmc::ensemble::Execution;
use ckmc::estimators::estimate_fd;
use ckmc::lattice::{Configuration, Lattice};
use ckmc::models::{ModelSpec, Param, ParameterVector, PerturbationDirection, RateRule};
use ckmc::observables::{ObservableKind, Partition};

fn setup(scheme: Scheme) -> CoupledSetup {
    let theta = ParameterVector::new()
        .with(Param::Beta, 0.1)
        .with(Param::J, 1.0)
        .with(Param::H, 0.0)
        .with(Param::Ca, 1.0)
        .with(Param::Cd, 1.0)
        .with(Param::Cdiff, 1.0);
    let spec = ModelSpec::new(RateRule::AdDiffusion, Lattice::one_d(100).unwrap(), theta);
    let dir = PerturbationDirection::new(Param::Beta, 1e-3).unwrap();
    CoupledSetup::new(
        &spec,
        &dir,
        ObservableKind::Coverage,
        Partition::default(),
        scheme,
    )
    .unwrap()
}

fn sequential_vs_parallel(c: &mut Criterion) {
    let grid = TimeGrid::uniform(0.0, 2.0, 11).unwrap();
    let s0 = Configuration::filled(100, 0);
    let mut group = c.benchmark_group("estimate_fd");
    group.sample_size(10);
    for scheme in [Scheme::Uncoupled, Scheme::MicroOpt, Scheme::Macro] {
        let setup = setup(scheme);
        for (name, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(name, scheme), &setup, |b, setup| {
                b.iter(|| estimate_fd(setup, &s0, &grid, 1e-3, 256, 1, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sequential_vs_parallel);
criterion_main!(benches);
