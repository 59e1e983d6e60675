//! Single-process stochastic simulation (direct method).

use crate::catalog::EventCatalog;
use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::models::Model;
use crate::observables::{Counts, Observable};
use crate::rng::RngStream;

/// Ascending observation times within `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon {horizon} must be finite and >= 0"
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(t) = times
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0 && **t <= horizon))
        {
            return Err(Error::InvalidGrid(format!(
                "time {t} outside [0, {horizon}]"
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "times must be strictly ascending".into(),
            ));
        }
        Ok(Self { times, horizon })
    }

    /// `count` evenly spaced points from `start` to `stop` inclusive; the
    /// horizon is `stop`.
    pub fn uniform(start: f64, stop: f64, count: usize) -> Result<Self> {
        match count {
            0 => Err(Error::InvalidGrid("grid count must be positive".into())),
            1 => Self::new(vec![start], stop),
            _ => {
                let step = (stop - start) / (count - 1) as f64;
                let mut times: Vec<f64> = (0..count).map(|i| start + step * i as f64).collect();
                times[count - 1] = stop;
                Self::new(times, stop)
            }
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A sampled jump: waiting time and the selected event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub dt: f64,
    pub site: usize,
    pub kind: u8,
}

/// Draws the next jump, or `None` if the process is absorbed (`λ = 0`).
///
/// Consumes three uniforms: waiting time, site, event within the site.
#[inline]
pub fn sample_jump(catalog: &EventCatalog, rng: &mut RngStream) -> Option<Jump> {
    let rate = catalog.total_rate();
    if rate <= 0.0 {
        return None;
    }
    let dt = rng.exponential(rate);
    let (site, kind) = catalog.select(rng.uniform(), rng.uniform())?;
    Some(Jump { dt, site, kind })
}

/// One process: configuration, catalog, clock and tracked observable counts.
#[derive(Debug, Clone)]
pub struct Process<'m> {
    model: &'m Model,
    sigma: Configuration,
    catalog: EventCatalog,
    time: f64,
    events: u64,
}

impl<'m> Process<'m> {
    pub fn new(model: &'m Model, sigma: Configuration) -> Result<Self> {
        model.check_configuration(&sigma)?;
        let catalog = EventCatalog::new(model, &sigma);
        Ok(Self {
            model,
            sigma,
            catalog,
            time: 0.0,
            events: 0,
        })
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn configuration(&self) -> &Configuration {
        &self.sigma
    }

    pub fn catalog(&self) -> &EventCatalog {
        &self.catalog
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Applies event `kind` at `x`, returning the observable change.
    pub fn apply(&mut self, x: usize, kind: u8, f: Option<&Observable>) -> Counts {
        let writes = self.model.writes(&self.sigma, x, kind);
        let d = f.map_or(Counts::default(), |f| f.delta_counts(&self.sigma, &writes));
        for &(y, v) in &writes {
            self.sigma.set(y as usize, v);
        }
        self.catalog.refresh(self.model, &self.sigma, &writes);
        self.events += 1;
        d
    }

    pub fn advance_clock(&mut self, dt: f64) {
        self.time += dt;
    }
}

/// Observable values of one path on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub events: u64,
}

/// Runs one path to the grid horizon, calling `record(i, σ, counts)` for
/// every grid time `t_i` with the configuration in force at `t_i` (the
/// pre-jump state when a jump lands exactly on `t_i`).
pub fn run_path<F>(
    model: &Model,
    sigma0: Configuration,
    grid: &TimeGrid,
    f: &Observable,
    rng: &mut RngStream,
    mut record: F,
) -> Result<u64>
where
    F: FnMut(usize, &Configuration, Counts),
{
    let mut p = Process::new(model, sigma0)?;
    let mut counts = f.counts(p.configuration());
    let times = grid.times();
    let mut next = 0;
    while next < times.len() {
        let jump = sample_jump(p.catalog(), rng);
        let t_jump = jump.map_or(f64::INFINITY, |j| p.time() + j.dt);
        while next < times.len() && times[next] <= t_jump {
            record(next, p.configuration(), counts);
            next += 1;
        }
        let Some(j) = jump else { break };
        if t_jump > grid.horizon() {
            break;
        }
        p.advance_clock(j.dt);
        counts = counts + p.apply(j.site, j.kind, Some(f));
    }
    Ok(p.events())
}

/// Simulates one path and samples `f` on the grid.
pub fn simulate_path(
    model: &Model,
    sigma0: Configuration,
    grid: &TimeGrid,
    f: &Observable,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let mut values = vec![0.0; grid.len()];
    let events = run_path(model, sigma0, grid, f, rng, |i, _, c| {
        values[i] = f.value(c)
    })?;
    Ok(Trajectory {
        times: grid.times().to_vec(),
        values,
        events,
    })
}
