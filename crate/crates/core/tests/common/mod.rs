#![allow(dead_code)]

use ckmc::coupling::{run_coupled_path, CoupledSetup, Scheme};
use ckmc::engine::TimeGrid;
use ckmc::lattice::{Configuration, Lattice};
use ckmc::models::{ModelSpec, Param, ParameterVector, PerturbationDirection, RateRule};
use ckmc::observables::{ObservableKind, Partition};
use ckmc::oracle::StateSpace;

pub fn ising_theta(beta: f64, j: f64, h: f64) -> ParameterVector {
    ParameterVector::new()
        .with(Param::Beta, beta)
        .with(Param::J, j)
        .with(Param::H, h)
        .with(Param::Ca, 1.0)
        .with(Param::Cd, 1.0)
}

pub fn ising(n: usize, beta: f64, j: f64, h: f64) -> ModelSpec {
    ModelSpec::new(
        RateRule::IsingAd,
        Lattice::one_d(n).unwrap(),
        ising_theta(beta, j, h),
    )
}

pub fn ad_diffusion(n: usize, beta: f64, j: f64, h: f64) -> ModelSpec {
    ModelSpec::new(
        RateRule::AdDiffusion,
        Lattice::one_d(n).unwrap(),
        ising_theta(beta, j, h).with(Param::Cdiff, 1.0),
    )
}

pub fn coverage_setup(spec: &ModelSpec, step: f64, scheme: Scheme) -> CoupledSetup {
    let dir = PerturbationDirection::new(Param::Beta, step).unwrap();
    CoupledSetup::new(
        spec,
        &dir,
        ObservableKind::Coverage,
        Partition::default(),
        scheme,
    )
    .unwrap()
}

/// Both processes at the same parameters.
pub fn unperturbed_setup(spec: &ModelSpec, scheme: Scheme) -> CoupledSetup {
    CoupledSetup::from_specs(
        spec,
        spec,
        ObservableKind::Coverage,
        Partition::default(),
        scheme,
    )
    .unwrap()
}

/// Empirical laws of σ_t and η_t over `paths` coupled paths.
pub fn coupled_marginals(
    setup: &CoupledSetup,
    sigma0: &Configuration,
    t: f64,
    paths: u64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let spec = setup.model_a.spec();
    let space = StateSpace::new(spec.species().values(), setup.n_sites(), 1 << 16).unwrap();
    let grid = TimeGrid::new(vec![t], t).unwrap();
    let mut ha = vec![0.0; space.len()];
    let mut hb = vec![0.0; space.len()];
    for p in 0..paths {
        run_coupled_path(setup, sigma0, sigma0, &grid, seed, p, |g| {
            ha[space.index(g.sigma)] += 1.0;
            hb[space.index(g.eta)] += 1.0;
        })
        .unwrap();
    }
    for h in [&mut ha, &mut hb] {
        h.iter_mut().for_each(|x| *x /= paths as f64);
    }
    (ha, hb)
}
