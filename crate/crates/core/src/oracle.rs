//! Exact master-equation solutions on small lattices.
//!
//! The state space is enumerated in full and the generator stored as
//! per-state transition lists. Transient laws use the dense matrix
//! exponential up to a configurable state count and uniformization above it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Species};
use crate::models::{perturb, Model, ModelSpec, PerturbationDirection, SiteEvents};
use crate::observables::{Observable, ObservableKind};

/// Largest state space the oracle accepts by default.
pub const DEFAULT_STATE_BUDGET: usize = 4096;
/// Largest state space solved with the dense matrix exponential by default.
pub const DEFAULT_DENSE_LIMIT: usize = 256;
/// Largest state space for the stationary solve.
pub const STATIONARY_LIMIT: usize = 1024;

/// Poisson tail mass left out by uniformization.
const POISSON_TAIL: f64 = 1e-14;
/// Largest `Λ·dt` handled in one uniformization chunk.
const MAX_CHUNK: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub state_budget: usize,
    pub dense_limit: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            state_budget: DEFAULT_STATE_BUDGET,
            dense_limit: DEFAULT_DENSE_LIMIT,
        }
    }
}

/// All configurations of a lattice, indexed in base `|Σ|` with site 0 as
/// the least significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    species: Vec<Species>,
    n: usize,
    size: usize,
}

impl StateSpace {
    pub fn new(species: &[Species], n: usize, budget: usize) -> Result<Self> {
        let states = (species.len() as u128)
            .checked_pow(n as u32)
            .unwrap_or(u128::MAX);
        if states > budget as u128 {
            return Err(Error::StateSpaceTooLarge { states, budget });
        }
        Ok(Self {
            species: species.to_vec(),
            n,
            size: states as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn index(&self, sigma: &Configuration) -> usize {
        let base = self.species.len();
        sigma.as_slice().iter().rev().fold(0, |acc, v| {
            let digit = self
                .species
                .iter()
                .position(|s| s == v)
                .expect("species in set");
            acc * base + digit
        })
    }

    pub fn configuration(&self, mut i: usize) -> Configuration {
        let base = self.species.len();
        Configuration::from_vec(
            (0..self.n)
                .map(|_| {
                    let v = self.species[i % base];
                    i /= base;
                    v
                })
                .collect(),
        )
    }
}

/// Generator of the jump process: `Q[s', s]` is the rate of `s → s'`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    space: StateSpace,
    /// Outgoing transitions per state, merged by target.
    out: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

impl GeneratorMatrix {
    /// Builds from per-state lists of `(target, rate)` pairs; rates to the
    /// same target are summed in list order.
    pub fn from_transitions(space: StateSpace, lists: Vec<Vec<(usize, f64)>>) -> Self {
        let mut out = Vec::with_capacity(lists.len());
        let mut exit = Vec::with_capacity(lists.len());
        for (s, list) in lists.into_iter().enumerate() {
            let mut merged: Vec<(usize, f64)> = Vec::new();
            for (t, r) in list {
                if t == s || r == 0.0 {
                    continue;
                }
                match merged.iter_mut().find(|(u, _)| *u == t) {
                    Some(e) => e.1 += r,
                    None => merged.push((t, r)),
                }
            }
            merged.sort_by_key(|&(t, _)| t);
            exit.push(merged.iter().map(|&(_, r)| r).sum());
            out.push(merged);
        }
        Self { space, out, exit }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// Rate of `from → to` (off-diagonal), or `-λ(from)` on the diagonal.
    pub fn entry(&self, to: usize, from: usize) -> f64 {
        if to == from {
            return -self.exit[from];
        }
        self.out[from]
            .iter()
            .find(|&&(t, _)| t == to)
            .map_or(0.0, |&(_, r)| r)
    }

    pub fn transitions(&self, from: usize) -> &[(usize, f64)] {
        &self.out[from]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for s in 0..n {
            q[(s, s)] = -self.exit[s];
            for &(t, r) in &self.out[s] {
                q[(t, s)] = r;
            }
        }
        q
    }

    fn max_exit(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max)
    }

    /// `Q p` (forward, on distributions).
    fn forward(&self, p: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            *o = -self.exit[s] * p[s];
        }
        for (ps, outs) in p.iter().zip(&self.out) {
            for &(t, r) in outs {
                out[t] += r * ps;
            }
        }
    }

    /// `Qᵀ u` (backward, on observables).
    fn backward(&self, u: &[f64], out: &mut [f64]) {
        for s in 0..u.len() {
            let mut acc = -self.exit[s] * u[s];
            for &(t, r) in &self.out[s] {
                acc += r * u[t];
            }
            out[s] = acc;
        }
    }
}

/// Generator of a compiled model over its full state space.
pub fn build_generator(model: &Model, options: &OracleOptions) -> Result<GeneratorMatrix> {
    let space = StateSpace::new(
        model.species().values(),
        model.n_sites(),
        options.state_budget,
    )?;
    let mut buf = SiteEvents::new();
    let lists = (0..space.len())
        .map(|s| {
            let sigma = space.configuration(s);
            let mut list = Vec::new();
            for x in 0..model.n_sites() {
                buf.clear();
                model.site_events(&sigma, x, &mut buf);
                for e in &buf {
                    let mut next = sigma.clone();
                    model.apply(&mut next, x, e.kind);
                    list.push((space.index(&next), e.rate));
                }
            }
            list
        })
        .collect();
    Ok(GeneratorMatrix::from_transitions(space, lists))
}

/// Observable values on every state.
pub fn observable_vector(gen: &GeneratorMatrix, f: &Observable) -> Vec<f64> {
    (0..gen.len())
        .map(|s| f.eval(&gen.space().configuration(s)))
        .collect()
}

enum Direction {
    Forward,
    Backward,
}

/// Applies `exp(t Q)` (forward) or `exp(t Qᵀ)` (backward) to `v` at each
/// time in `times` (ascending, nonnegative).
fn propagate(
    gen: &GeneratorMatrix,
    v0: &[f64],
    times: &[f64],
    dir: Direction,
    options: &OracleOptions,
) -> Result<Vec<Vec<f64>>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0 && t.is_finite()))
    {
        return Err(Error::InvalidGrid(
            "oracle times must be ascending and >= 0".into(),
        ));
    }
    if gen.len() <= options.dense_limit {
        let q = gen.to_dense();
        let q = match dir {
            Direction::Forward => q,
            Direction::Backward => q.transpose(),
        };
        let v = DVector::from_column_slice(v0);
        return Ok(times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    v0.to_vec()
                } else {
                    ((&q * t).exp() * &v).as_slice().to_vec()
                }
            })
            .collect());
    }

    let lambda = gen.max_exit();
    let n = gen.len();
    let mut v = v0.to_vec();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut tmp = vec![0.0; n];
    let mut term = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for &t in times {
        let mut remaining = t - now;
        while remaining > 0.0 && lambda > 0.0 {
            let dt = remaining.min(MAX_CHUNK / lambda);
            let mu = lambda * dt;
            // Σ_k e^{-μ} μ^k / k! P^k v with P = I + Q/Λ
            let mut weight = (-mu).exp();
            let mut mass = weight;
            term.copy_from_slice(&v);
            for (a, x) in acc.iter_mut().zip(&term) {
                *a = weight * x;
            }
            let mut k = 0usize;
            while 1.0 - mass > POISSON_TAIL {
                k += 1;
                if k > 10_000 {
                    return Err(Error::Integration("uniformization did not converge".into()));
                }
                match dir {
                    Direction::Forward => gen.forward(&term, &mut tmp),
                    Direction::Backward => gen.backward(&term, &mut tmp),
                }
                for (x, d) in term.iter_mut().zip(&tmp) {
                    *x += d / lambda;
                }
                weight *= mu / k as f64;
                mass += weight;
                for (a, x) in acc.iter_mut().zip(&term) {
                    *a += weight * x;
                }
            }
            v.copy_from_slice(&acc);
            remaining -= dt;
        }
        now = t;
        out.push(v.clone());
    }
    Ok(out)
}

/// `P(·, t | σ₀)` at each time.
pub fn exact_marginals(
    gen: &GeneratorMatrix,
    sigma0: &Configuration,
    times: &[f64],
    options: &OracleOptions,
) -> Result<Vec<Vec<f64>>> {
    let mut p0 = vec![0.0; gen.len()];
    p0[gen.space().index(sigma0)] = 1.0;
    propagate(gen, &p0, times, Direction::Forward, options)
}

/// `P(·, t | σ₀)`.
pub fn exact_marginal(
    gen: &GeneratorMatrix,
    sigma0: &Configuration,
    t: f64,
    options: &OracleOptions,
) -> Result<Vec<f64>> {
    Ok(exact_marginals(gen, sigma0, &[t], options)?.remove(0))
}

/// `u(σ₀, t) = (e^{tL} f)(σ₀)` at each time, solved backward on observables.
pub fn solve_expectation(
    gen: &GeneratorMatrix,
    f: &[f64],
    sigma0: &Configuration,
    times: &[f64],
    options: &OracleOptions,
) -> Result<Vec<f64>> {
    let s0 = gen.space().index(sigma0);
    Ok(propagate(gen, f, times, Direction::Backward, options)?
        .into_iter()
        .map(|u| u[s0])
        .collect())
}

/// Expected observable `E f(σ_t)` for a model specification.
pub fn expected_observable(
    spec: &ModelSpec,
    observable: ObservableKind,
    sigma0: &Configuration,
    times: &[f64],
    options: &OracleOptions,
) -> Result<Vec<f64>> {
    let model = spec.build()?;
    model.check_configuration(sigma0)?;
    let gen = build_generator(&model, options)?;
    let f = Observable::new(observable, spec)?;
    solve_expectation(&gen, &observable_vector(&gen, &f), sigma0, times, options)
}

/// Exact finite difference `u^θ(t, σ₀) - u^{θ+ε}(t, σ₀)`.
///
/// The observable is bound to the unperturbed model in both terms.
pub fn exact_fd(
    spec: &ModelSpec,
    direction: &PerturbationDirection,
    observable: ObservableKind,
    sigma0: &Configuration,
    times: &[f64],
    options: &OracleOptions,
) -> Result<Vec<f64>> {
    let f = Observable::new(observable, spec)?;
    let spec_b = spec.with_params(perturb(&spec.params, direction)?);
    let solve = |s: &ModelSpec| -> Result<Vec<f64>> {
        let model = s.build()?;
        model.check_configuration(sigma0)?;
        let gen = build_generator(&model, options)?;
        solve_expectation(&gen, &observable_vector(&gen, &f), sigma0, times, options)
    };
    let ua = solve(spec)?;
    let ub = solve(&spec_b)?;
    Ok(ua.iter().zip(&ub).map(|(a, b)| a - b).collect())
}

/// Stationary distribution: the normalized null vector of `Q`.
pub fn stationary(gen: &GeneratorMatrix) -> Result<Vec<f64>> {
    let n = gen.len();
    if n > STATIONARY_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            states: n as u128,
            budget: STATIONARY_LIMIT,
        });
    }
    let mut q = gen.to_dense();
    for c in 0..n {
        q[(n - 1, c)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let p = q
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Integration("generator has no unique stationary law".into()))?;
    Ok(p.as_slice().to_vec())
}

/// Total-variation distance `½ Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::models::{diffusion_rate, ising_rate, Param, ParameterVector, RateRule};

    fn ising(n: usize, theta: ParameterVector) -> ModelSpec {
        ModelSpec::new(RateRule::IsingAd, Lattice::one_d(n).unwrap(), theta)
    }

    fn theta() -> ParameterVector {
        ParameterVector::new()
            .with(Param::Beta, 1.0)
            .with(Param::J, 1.0)
            .with(Param::H, 1.0)
            .with(Param::Ca, 1.0)
            .with(Param::Cd, 1.0)
    }

    fn two_state(a: f64, d: f64) -> ModelSpec {
        ising(
            1,
            theta()
                .with(Param::Beta, 0.0)
                .with(Param::Ca, a)
                .with(Param::Cd, d),
        )
    }

    #[test]
    fn single_site_generator() {
        let m = two_state(2.0, 3.0).build().unwrap();
        let g = build_generator(&m, &OracleOptions::default()).unwrap();
        let q = g.to_dense();
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[-2.0, 3.0, 2.0, -3.0]));
    }

    #[test]
    fn columns_sum_to_zero() {
        let m = ising(4, theta()).build().unwrap();
        let q = build_generator(&m, &OracleOptions::default())
            .unwrap()
            .to_dense();
        for c in 0..q.ncols() {
            assert!(q.column(c).sum().abs() < 1e-12);
            for r in 0..q.nrows() {
                assert!(r == c || q[(r, c)] >= 0.0);
            }
        }
    }

    #[test]
    fn three_site_hand_enumeration() {
        let m = ising(3, theta()).build().unwrap();
        let g = build_generator(&m, &OracleOptions::default()).unwrap();
        let e = std::f64::consts::E;
        // 000 -> each single adsorption at c_a = 1
        let s000 = 0;
        assert_eq!(g.transitions(s000), &[(1, 1.0), (2, 1.0), (4, 1.0)]);
        // 111 -> desorption with 2 occupied neighbors: e^{-(2-1)}
        let s111 = 7;
        for &(_, r) in g.transitions(s111) {
            assert!((r - 1.0 / e).abs() < 1e-15);
        }
        // 010 (index 2) -> desorption of site 1 with no neighbors: e^{1}
        assert!((g.entry(0, 2) - e).abs() < 1e-15);
        assert_eq!(g.entry(3, 2), 1.0);
        assert_eq!(g.entry(6, 2), 1.0);
    }

    #[test]
    fn two_state_closed_form_both_methods() {
        let (a, d) = (1.3, 0.6);
        let spec = two_state(a, d);
        let times = [0.0, 0.1, 0.5, 1.0, 3.0, 10.0];
        let s0 = Configuration::filled(1, 0);
        for dense_limit in [0, 256] {
            let opts = OracleOptions {
                dense_limit,
                ..Default::default()
            };
            let u =
                expected_observable(&spec, ObservableKind::Coverage, &s0, &times, &opts).unwrap();
            for (t, v) in times.iter().zip(&u) {
                let exact = a / (a + d) * (1.0 - (-(a + d) * t).exp());
                assert!(
                    (v - exact).abs() < 1e-10,
                    "t={t} dense<= {dense_limit}: {v} vs {exact}"
                );
            }
            assert_eq!(u[0], 0.0);
        }
    }

    #[test]
    fn uniformization_matches_dense_on_ising() {
        let spec = ising(6, theta());
        let m = spec.build().unwrap();
        let s0 = Configuration::filled(6, 0);
        let times = [0.5, 1.0, 2.0, 5.0, 10.0];
        let dense = OracleOptions::default();
        let sparse = OracleOptions {
            dense_limit: 0,
            ..Default::default()
        };
        let g = build_generator(&m, &dense).unwrap();
        let pd = exact_marginals(&g, &s0, &times, &dense).unwrap();
        let ps = exact_marginals(&g, &s0, &times, &sparse).unwrap();
        for (a, b) in pd.iter().zip(&ps) {
            assert!(total_variation(a, b) < 1e-9);
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!(a.iter().all(|&p| p > -1e-12));
        }
    }

    #[test]
    fn duality_between_forward_and_backward() {
        let spec = ising(5, theta());
        let m = spec.build().unwrap();
        let opts = OracleOptions::default();
        let g = build_generator(&m, &opts).unwrap();
        let mut r = crate::rng::RngStream::new(3, 0, 0);
        let f: Vec<f64> = (0..g.len()).map(|_| r.uniform() - 0.5).collect();
        let s0 = Configuration::from_vec(vec![1, 0, 0, 1, 0]);
        let times = [0.3, 1.7];
        let u = solve_expectation(&g, &f, &s0, &times, &opts).unwrap();
        let p = exact_marginals(&g, &s0, &times, &opts).unwrap();
        for (ui, pi) in u.iter().zip(&p) {
            let dual: f64 = pi.iter().zip(&f).map(|(a, b)| a * b).sum();
            assert!((ui - dual).abs() < 1e-7);
        }
        let p0 = exact_marginal(&g, &s0, 0.0, &opts).unwrap();
        assert_eq!(p0[g.space().index(&s0)], 1.0);
    }

    #[test]
    fn stationary_coverage_without_interaction() {
        // J = 0: independent sites, coverage c_a / (c_a + c_d e^{β h})
        let th = theta()
            .with(Param::J, 0.0)
            .with(Param::Ca, 0.7)
            .with(Param::Cd, 1.2);
        let spec = ising(4, th);
        let m = spec.build().unwrap();
        let g = build_generator(&m, &OracleOptions::default()).unwrap();
        let pi = stationary(&g).unwrap();
        let f = Observable::new(ObservableKind::Coverage, &spec).unwrap();
        let cov: f64 = observable_vector(&g, &f)
            .iter()
            .zip(&pi)
            .map(|(a, b)| a * b)
            .sum();
        let expected = 0.7 / (0.7 + 1.2 * 1f64.exp());
        assert!((cov - expected).abs() < 1e-10);
    }

    #[test]
    fn exact_fd_degenerate_and_antisymmetric() {
        let spec = ising(4, theta());
        let s0 = Configuration::filled(4, 0);
        let times = [0.5, 1.0, 2.0];
        let opts = OracleOptions::default();
        let zero = PerturbationDirection {
            param: Param::Beta,
            step: 0.0,
        };
        let d0 = exact_fd(&spec, &zero, ObservableKind::Coverage, &s0, &times, &opts).unwrap();
        assert!(d0.iter().all(|&v| v == 0.0));
        let h = 1e-4;
        let up = PerturbationDirection::new(Param::Beta, h).unwrap();
        let down = PerturbationDirection::new(Param::Beta, -h).unwrap();
        let du = exact_fd(&spec, &up, ObservableKind::Coverage, &s0, &times, &opts).unwrap();
        let dd = exact_fd(&spec, &down, ObservableKind::Coverage, &s0, &times, &opts).unwrap();
        for (a, b) in du.iter().zip(&dd) {
            assert!(a * b < 0.0);
            assert!((a + b).abs() < 10.0 * h * h, "{a} {b}");
        }
    }

    #[test]
    fn budget_refusal() {
        let m = ising(20, theta()).build().unwrap();
        assert!(matches!(
            build_generator(&m, &OracleOptions::default()),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    /// Generator assembled directly from the rate formulas, independent of
    /// the event enumeration.
    fn formula_generator(spec: &ModelSpec) -> GeneratorMatrix {
        let lat = &spec.lattice;
        let n = lat.n_sites();
        let space = StateSpace::new(&[0, 1], n, 4096).unwrap();
        let diffusing = spec.rule == RateRule::AdDiffusion;
        let lists = (0..space.len())
            .map(|s| {
                let sigma = space.configuration(s);
                let mut list = Vec::new();
                for x in 0..n {
                    let mut flipped = sigma.clone();
                    flipped.set(x, 1 - sigma.get(x));
                    list.push((
                        space.index(&flipped),
                        ising_rate(x, &sigma, &spec.params, lat).unwrap(),
                    ));
                    if diffusing {
                        for o in [[-1, 0], [1, 0]] {
                            let y = lat.shift(x, o);
                            let r = diffusion_rate(x, y, &sigma, &spec.params, lat).unwrap();
                            if r > 0.0 {
                                let mut moved = sigma.clone();
                                moved.set(x, 0);
                                moved.set(y, 1);
                                list.push((space.index(&moved), r));
                            }
                        }
                    }
                }
                list
            })
            .collect();
        GeneratorMatrix::from_transitions(space, lists)
    }

    #[test]
    fn double_entry_generator_agrees_exactly() {
        for n in [2, 3, 5] {
            for rule in [RateRule::IsingAd, RateRule::AdDiffusion] {
                let spec = ModelSpec::new(
                    rule,
                    Lattice::one_d(n).unwrap(),
                    theta().with(Param::Cdiff, 0.8).with(Param::H, 0.3),
                );
                let a = build_generator(&spec.build().unwrap(), &OracleOptions::default()).unwrap();
                let b = formula_generator(&spec);
                assert_eq!(a.to_dense(), b.to_dense(), "{rule} N={n}");
            }
        }
    }

    #[test]
    fn two_site_total_exit_rate() {
        let m = ising(2, theta()).build().unwrap();
        let g = build_generator(&m, &OracleOptions::default()).unwrap();
        let s = g.space().index(&Configuration::from_vec(vec![1, 0]));
        assert!((-g.entry(s, s) - (1.0 + 1f64.exp())).abs() < 1e-12);
    }
}
