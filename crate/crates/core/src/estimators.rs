//! Finite-difference estimators over ensembles of coupled paths.

use std::fmt::Write as _;
use std::ops::Range;

use crate::coupling::{run_coupled_path, CoupledSetup, PathStats};
use crate::engine::TimeGrid;
use crate::ensemble::{map_shards, Execution};
use crate::error::{Error, Result};
use crate::lattice::Configuration;

/// Two-sided 99% standard normal quantile `z_{0.995}`.
pub const Z_995: f64 = 2.575_829_303_548_900_4;

/// CSV header of [`EstimatorResult::to_csv`].
pub const CSV_HEADER: &str = "time,mean_diff,derivative,variance,ci_halfwidth,n_samples";

/// Streaming mean and second central moment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Pairwise combination of two disjoint samples.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        Moments {
            n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / n as f64,
        }
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }
}

/// Totals of simulated work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventTotals {
    pub steps: u64,
    pub jumps_a: u64,
    pub jumps_b: u64,
    pub joint: u64,
}

impl EventTotals {
    fn add(&mut self, s: &PathStats) {
        self.steps += s.steps;
        self.jumps_a += s.jumps_a;
        self.jumps_b += s.jumps_b;
        self.joint += s.joint;
    }

    fn merge(&self, o: &EventTotals) -> EventTotals {
        EventTotals {
            steps: self.steps + o.steps,
            jumps_a: self.jumps_a + o.jumps_a,
            jumps_b: self.jumps_b + o.jumps_b,
            joint: self.joint + o.joint,
        }
    }
}

/// Per-grid-time statistics of `f(σ_t) - f(η_t)` over a set of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub times: Vec<f64>,
    /// Perturbation step `h`.
    pub step: f64,
    pub moments: Vec<Moments>,
    /// Disjoint path-index ranges that contributed, ascending.
    pub paths: Vec<Range<u64>>,
    pub events: EventTotals,
}

impl EstimatorResult {
    pub fn empty(times: &[f64], step: f64) -> Self {
        Self {
            times: times.to_vec(),
            step,
            moments: vec![Moments::default(); times.len()],
            paths: Vec::new(),
            events: EventTotals::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_samples(&self) -> u64 {
        self.moments.first().map_or(0, |m| m.n)
    }

    /// Ensemble mean of `f(σ_t) - f(η_t)`, estimating `u^θ - u^{θ+h}`.
    pub fn mean_diff(&self, i: usize) -> f64 {
        self.moments[i].mean
    }

    /// Forward-difference derivative `(u^{θ+h} - u^θ) / h`.
    pub fn derivative(&self, i: usize) -> f64 {
        -self.moments[i].mean / self.step
    }

    /// Sample variance of `f(σ_t) - f(η_t)`.
    pub fn variance(&self, i: usize) -> f64 {
        self.moments[i].variance()
    }

    /// 99% confidence half-width of the mean difference.
    pub fn ci_halfwidth(&self, i: usize) -> f64 {
        let n = self.moments[i].n;
        if n == 0 {
            return 0.0;
        }
        Z_995 * (self.variance(i) / n as f64).sqrt()
    }

    /// Mean of the variance over grid times in `[lo, hi]`.
    pub fn mean_variance(&self, lo: f64, hi: f64) -> f64 {
        let v: Vec<f64> = (0..self.len())
            .filter(|&i| self.times[i] >= lo && self.times[i] <= hi)
            .map(|i| self.variance(i))
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    /// Combines results from disjoint path sets on the same grid.
    pub fn merge(&self, other: &EstimatorResult) -> Result<EstimatorResult> {
        if self.times != other.times {
            return Err(Error::Merge("time grids differ".into()));
        }
        if self.step != other.step {
            return Err(Error::Merge("perturbation steps differ".into()));
        }
        let mut paths: Vec<Range<u64>> = self.paths.iter().chain(&other.paths).cloned().collect();
        paths.sort_by_key(|r| (r.start, r.end));
        if paths.windows(2).any(|w| w[0].end > w[1].start) {
            return Err(Error::Merge("path ranges overlap".into()));
        }
        Ok(EstimatorResult {
            times: self.times.clone(),
            step: self.step,
            moments: self
                .moments
                .iter()
                .zip(&other.moments)
                .map(|(a, b)| a.merge(b))
                .collect(),
            paths,
            events: self.events.merge(&other.events),
        })
    }

    /// CSV with header [`CSV_HEADER`], one row per grid time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.times[i],
                self.mean_diff(i),
                self.derivative(i),
                self.variance(i),
                self.ci_halfwidth(i),
                self.moments[i].n
            )
            .expect("writing to a string");
        }
        out
    }
}

/// Per-grid-time variance ratios of two results.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRatio {
    pub ratios: Vec<f64>,
    /// Mean ratio over the second half of the grid.
    pub summary: f64,
}

/// `Var_a / Var_b` per grid time; `0/0` counts as 1.
pub fn variance_ratio(a: &EstimatorResult, b: &EstimatorResult) -> Result<VarianceRatio> {
    if a.times != b.times {
        return Err(Error::Merge("time grids differ".into()));
    }
    let ratios: Vec<f64> = (0..a.len())
        .map(|i| {
            let (va, vb) = (a.variance(i), b.variance(i));
            if va == 0.0 && vb == 0.0 {
                1.0
            } else {
                va / vb
            }
        })
        .collect();
    let half = &ratios[ratios.len() / 2..];
    let summary = half.iter().sum::<f64>() / half.len().max(1) as f64;
    Ok(VarianceRatio { ratios, summary })
}

/// Runs paths `paths` of a coupled ensemble and accumulates the estimator.
pub fn estimate_range(
    setup: &CoupledSetup,
    sigma0: &Configuration,
    grid: &TimeGrid,
    step: f64,
    master_seed: u64,
    paths: Range<u64>,
) -> Result<EstimatorResult> {
    let f = setup.observable();
    let mut r = EstimatorResult::empty(grid.times(), step);
    for path in paths.clone() {
        let moments = &mut r.moments;
        let stats = run_coupled_path(setup, sigma0, sigma0, grid, master_seed, path, |g| {
            moments[g.index].push(f.value(g.counts_sigma) - f.value(g.counts_eta));
        })?;
        r.events.add(&stats);
    }
    if !paths.is_empty() {
        r.paths.push(paths);
    }
    Ok(r)
}

/// Coupled finite-difference estimate from `n_samples` paths started at
/// `σ₀ = η₀`. Path `i` draws from streams keyed by `(master_seed, i)`, and
/// shards merge in index order, so the result does not depend on `exec`.
pub fn estimate_fd(
    setup: &CoupledSetup,
    sigma0: &Configuration,
    grid: &TimeGrid,
    step: f64,
    n_samples: u64,
    master_seed: u64,
    exec: Execution,
) -> Result<EstimatorResult> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample count must be at least 2, got {n_samples}"
        )));
    }
    let parts = map_shards(0..n_samples, exec, |r| {
        estimate_range(setup, sigma0, grid, step, master_seed, r)
    })?;
    parts
        .iter()
        .try_fold(EstimatorResult::empty(grid.times(), step), |acc, p| {
            acc.merge(p)
        })
}
