use crate::engine::{run_path, TimeGrid};
use crate::error::Result;
use crate::lattice::Configuration;
use crate::models::{perturb, Model, ModelSpec, PerturbationDirection};
use crate::observables::{Counts, Observable, ObservableKind, Partition};
use crate::rng::RngStream;

use super::classify::{Classifier, Side};
use super::coarse::CoarseStepper;
use super::micro::{MicroRule, MicroStepper};
use super::{Branch, Scheme};

/// Everything needed to simulate coupled pairs: the two compiled models,
/// the observable with its partition, and the scheme.
#[derive(Debug, Clone)]
pub struct CoupledSetup {
    pub model_a: Model,
    pub model_b: Model,
    pub classifier: Classifier,
    pub scheme: Scheme,
}

impl CoupledSetup {
    /// Process A runs at `θ`, process B at `θ + h e_l`.
    pub fn new(
        spec: &ModelSpec,
        direction: &PerturbationDirection,
        observable: ObservableKind,
        partition: Partition,
        scheme: Scheme,
    ) -> Result<Self> {
        let spec_b = spec.with_params(perturb(&spec.params, direction)?);
        Self::from_specs(spec, &spec_b, observable, partition, scheme)
    }

    pub fn from_specs(
        spec_a: &ModelSpec,
        spec_b: &ModelSpec,
        observable: ObservableKind,
        partition: Partition,
        scheme: Scheme,
    ) -> Result<Self> {
        let model_a = spec_a.build()?;
        let model_b = spec_b.build()?;
        scheme.validate(model_a.n_sites())?;
        let f = Observable::new(observable, spec_a)?;
        let classifier = Classifier::new(&model_a, f, partition)?;
        Ok(Self {
            model_a,
            model_b,
            classifier,
            scheme,
        })
    }

    pub fn observable(&self) -> &Observable {
        self.classifier.observable()
    }

    pub fn n_sites(&self) -> usize {
        self.model_a.n_sites()
    }
}

/// State of both processes at one grid time.
#[derive(Debug, Clone, Copy)]
pub struct GridSample<'a> {
    pub index: usize,
    pub sigma: &'a Configuration,
    pub eta: &'a Configuration,
    pub counts_sigma: Counts,
    pub counts_eta: Counts,
}

/// Work done by one coupled path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PathStats {
    /// Coupled steps (a joint jump counts once).
    pub steps: u64,
    pub jumps_a: u64,
    pub jumps_b: u64,
    pub joint: u64,
}

enum Stepper<'m> {
    Micro(MicroStepper<'m>),
    Coarse(CoarseStepper<'m>),
}

impl<'m> Stepper<'m> {
    fn total_rate(&self) -> f64 {
        match self {
            Stepper::Micro(s) => s.total_rate(),
            Stepper::Coarse(s) => s.total_rate(),
        }
    }

    fn jump(&mut self, rng: &mut RngStream) -> Result<Branch> {
        match self {
            Stepper::Micro(s) => s.jump(rng),
            Stepper::Coarse(s) => s.jump(rng),
        }
    }

    fn sides(&self) -> (&Side<'m>, &Side<'m>) {
        match self {
            Stepper::Micro(s) => s.sides(),
            Stepper::Coarse(s) => s.sides(),
        }
    }
}

/// Simulates coupled path number `path` to the grid horizon.
///
/// `record` is called once per grid time, in order, with the pre-jump state
/// when a jump lands exactly on a grid time. Random streams depend only on
/// `(master_seed, path)`.
pub fn run_coupled_path<F>(
    setup: &CoupledSetup,
    sigma0: &Configuration,
    eta0: &Configuration,
    grid: &TimeGrid,
    master_seed: u64,
    path: u64,
    mut record: F,
) -> Result<PathStats>
where
    F: FnMut(GridSample<'_>),
{
    let cls = &setup.classifier;
    let (ma, mb) = (&setup.model_a, &setup.model_b);
    let mut rng = RngStream::new(master_seed, path, 0);
    let mut stepper = match setup.scheme {
        Scheme::Uncoupled | Scheme::Crn => {
            let mut rng_b = match setup.scheme {
                Scheme::Crn => rng.clone(),
                _ => RngStream::new(master_seed, path, 1),
            };
            return run_independent(setup, sigma0, eta0, grid, &mut rng, &mut rng_b, record);
        }
        Scheme::Trivial | Scheme::MicroUnopt | Scheme::MicroOpt => {
            let rule = match setup.scheme {
                Scheme::Trivial => MicroRule::Zero,
                Scheme::MicroUnopt => MicroRule::Unoptimized,
                _ => MicroRule::Optimized,
            };
            Stepper::Micro(MicroStepper::new(
                ma,
                mb,
                cls,
                rule,
                sigma0.clone(),
                eta0.clone(),
            )?)
        }
        Scheme::Coarse(_) | Scheme::Macro => {
            let q = setup
                .scheme
                .cell_size(ma.n_sites())
                .expect("class-based scheme");
            Stepper::Coarse(CoarseStepper::new(
                ma,
                mb,
                cls,
                q,
                sigma0.clone(),
                eta0.clone(),
            )?)
        }
    };

    let times = grid.times();
    let mut stats = PathStats::default();
    let mut t = 0.0;
    let mut next = 0;
    while next < times.len() {
        let rate = stepper.total_rate();
        let t_jump = if rate > 0.0 {
            t + rng.exponential(rate)
        } else {
            f64::INFINITY
        };
        while next < times.len() && times[next] <= t_jump {
            let (a, b) = stepper.sides();
            record(GridSample {
                index: next,
                sigma: a.configuration(),
                eta: b.configuration(),
                counts_sigma: a.counts(),
                counts_eta: b.counts(),
            });
            next += 1;
        }
        if t_jump > grid.horizon() {
            break;
        }
        t = t_jump;
        let branch = stepper.jump(&mut rng)?;
        stats.steps += 1;
        stats.joint += (branch == Branch::Joint) as u64;
    }
    let (a, b) = stepper.sides();
    stats.jumps_a = a.jumps();
    stats.jumps_b = b.jumps();
    Ok(stats)
}

fn run_independent<F>(
    setup: &CoupledSetup,
    sigma0: &Configuration,
    eta0: &Configuration,
    grid: &TimeGrid,
    rng_a: &mut RngStream,
    rng_b: &mut RngStream,
    mut record: F,
) -> Result<PathStats>
where
    F: FnMut(GridSample<'_>),
{
    let f = setup.observable();
    let mut snapshots: Vec<(Configuration, Counts)> = Vec::with_capacity(grid.len());
    let jumps_a = run_path(&setup.model_a, sigma0.clone(), grid, f, rng_a, |_, s, c| {
        snapshots.push((s.clone(), c))
    })?;
    let jumps_b = run_path(&setup.model_b, eta0.clone(), grid, f, rng_b, |i, e, c| {
        let (s, cs) = &snapshots[i];
        record(GridSample {
            index: i,
            sigma: s,
            eta: e,
            counts_sigma: *cs,
            counts_eta: c,
        })
    })?;
    Ok(PathStats {
        steps: jumps_a + jumps_b,
        jumps_a,
        jumps_b,
        joint: 0,
    })
}
