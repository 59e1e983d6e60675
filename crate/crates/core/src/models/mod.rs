//! Rate rules for the benchmark lattice models.
//!
//! Every model generates its events per anchor site `x`. Each event has a
//! small integer `kind` identifying the mechanism (and, for pair mechanisms,
//! which neighbor slot it involves); kinds are emitted in ascending order so
//! two processes running the same model can be matched event by event.
//!
//! | rule           | kinds                                                              |
//! |----------------|--------------------------------------------------------------------|
//! | `ising_ad`     | 0 flip                                                             |
//! | `ad_diffusion` | 0 flip, `1+j` hop to axis slot `j`                                 |
//! | `zgb`          | 0 CO adsorption, `1+j` O₂ adsorption, `5+j` CO+O reaction          |
//! | `evans_co`     | 0 CO ads., `1+j` O₂ ads. (diagonal `j`), `5+j` CO hop, 9 CO des., `10+j` reaction |

mod params;

use std::fmt;
use std::str::FromStr;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::{
    Configuration, Event, Lattice, LocalConfiguration, NeighborTable, NeighborhoodShape, Species,
    SpeciesSet,
};

pub use params::{perturb, Param, ParameterVector, PerturbationDirection};

const CO: Species = -1;
const VACANT: Species = 0;
const O: Species = 1;

/// Identifier of a rate rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateRule {
    /// Ising-type adsorption/desorption.
    IsingAd,
    /// Ising adsorption/desorption plus nearest-neighbor hopping.
    AdDiffusion,
    /// Ziff–Gulari–Barshad CO oxidation.
    Zgb,
    /// CO oxidation with CO diffusion/desorption and O–O repulsion.
    EvansCo,
}

impl RateRule {
    pub fn name(self) -> &'static str {
        match self {
            RateRule::IsingAd => "ising_ad",
            RateRule::AdDiffusion => "ad_diffusion",
            RateRule::Zgb => "zgb",
            RateRule::EvansCo => "evans_co",
        }
    }

    pub fn required_params(self) -> &'static [Param] {
        match self {
            RateRule::IsingAd => &[Param::Beta, Param::J, Param::H, Param::Ca, Param::Cd],
            RateRule::AdDiffusion => &[
                Param::Beta,
                Param::J,
                Param::H,
                Param::Ca,
                Param::Cd,
                Param::Cdiff,
            ],
            RateRule::Zgb => &[Param::Ca, Param::Cr],
            RateRule::EvansCo => &[Param::Ca, Param::Cd, Param::Cdiff, Param::Cr],
        }
    }

    pub fn species(self) -> SpeciesSet {
        match self {
            RateRule::IsingAd | RateRule::AdDiffusion => SpeciesSet::binary(),
            RateRule::Zgb | RateRule::EvansCo => SpeciesSet::co_oxidation(),
        }
    }

    /// Neighborhood shape on a lattice of the given dimension.
    pub fn shape(self, dimension: usize) -> Result<NeighborhoodShape> {
        match (self, dimension) {
            (RateRule::IsingAd | RateRule::AdDiffusion, 1) => {
                Ok(NeighborhoodShape::nearest_neighbor_1d())
            }
            (RateRule::IsingAd | RateRule::AdDiffusion | RateRule::Zgb, 2) => {
                Ok(NeighborhoodShape::von_neumann_2d())
            }
            (RateRule::EvansCo, 2) => Ok(NeighborhoodShape::evans_2d()),
            _ => Err(Error::InvalidLattice(format!(
                "`{}` is not defined on a {dimension}D lattice",
                self.name()
            ))),
        }
    }
}

impl fmt::Display for RateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ising_ad" => Ok(RateRule::IsingAd),
            "ad_diffusion" => Ok(RateRule::AdDiffusion),
            "zgb" => Ok(RateRule::Zgb),
            "evans_co" => Ok(RateRule::EvansCo),
            other => Err(Error::Config(format!("unknown rate rule `{other}`"))),
        }
    }
}

/// Model selection: rule, lattice and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub rule: RateRule,
    pub lattice: Lattice,
    pub params: ParameterVector,
}

impl ModelSpec {
    pub fn new(rule: RateRule, lattice: Lattice, params: ParameterVector) -> Self {
        Self {
            rule,
            lattice,
            params,
        }
    }

    pub fn with_params(&self, params: ParameterVector) -> Self {
        Self {
            params,
            ..self.clone()
        }
    }

    pub fn species(&self) -> SpeciesSet {
        self.rule.species()
    }

    pub fn shape(&self) -> Result<NeighborhoodShape> {
        self.rule.shape(self.lattice.dimension())
    }

    pub fn validate(&self) -> Result<()> {
        for &p in self.rule.required_params() {
            self.params.require(p)?;
        }
        self.params.validate()?;
        if matches!(self.rule, RateRule::Zgb | RateRule::EvansCo) {
            let ca = self.params.require(Param::Ca)?;
            if ca > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "`c_a` = {ca} must lie in [0, 1] for `{}`",
                    self.rule
                )));
            }
        }
        self.shape().map(|_| ())
    }

    pub fn build(&self) -> Result<Model> {
        Model::new(self)
    }
}

/// One event anchored at a site: mechanism kind and rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteEvent {
    pub kind: u8,
    pub rate: f64,
}

pub type SiteEvents = SmallVec<[SiteEvent; 6]>;

/// Site writes performed by an event, restricted to sites that change.
pub type Writes = SmallVec<[(u32, Species); 2]>;

/// A model compiled against its lattice, ready for event enumeration.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    species: SpeciesSet,
    shape: NeighborhoodShape,
    table: NeighborTable,
    dependents: NeighborTable,
    axis_slots: Vec<usize>,
    /// For each diagonal slot (evans_co), the slots adjacent to it.
    diagonals: Vec<(usize, Vec<usize>)>,
    /// Desorption rate indexed by occupied-neighbor count.
    desorption: Vec<f64>,
    c_a: f64,
    c_d: f64,
    c_diff: f64,
    c_r: f64,
}

impl Model {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let shape = spec.shape()?;
        let table = NeighborTable::new(&spec.lattice, &shape)?;
        let reflected = NeighborhoodShape::new(shape.reflected())?;
        let dependents = NeighborTable::new(&spec.lattice, &reflected)?;
        let axis_slots = shape.axis_slots();
        let p = &spec.params;
        let get = |q: Param| p.get(q).unwrap_or(0.0);

        let desorption = match spec.rule {
            RateRule::IsingAd | RateRule::AdDiffusion => {
                let (beta, j, h, cd) = (
                    get(Param::Beta),
                    get(Param::J),
                    get(Param::H),
                    get(Param::Cd),
                );
                (0..=axis_slots.len())
                    .map(|n| cd * (-beta * (j * n as f64 - h)).exp())
                    .collect()
            }
            _ => Vec::new(),
        };

        let diagonals = if spec.rule == RateRule::EvansCo {
            let offs = shape.offsets();
            (0..shape.size())
                .filter(|&i| offs[i][0].abs() == 1 && offs[i][1].abs() == 1)
                .map(|i| {
                    let adj = (0..shape.size())
                        .filter(|&j| {
                            j != 0
                                && (offs[j][0] - offs[i][0]).abs() + (offs[j][1] - offs[i][1]).abs()
                                    == 1
                        })
                        .collect();
                    (i, adj)
                })
                .collect()
        } else {
            Vec::new()
        };

        Ok(Self {
            spec: spec.clone(),
            species: spec.species(),
            shape,
            table,
            dependents,
            axis_slots,
            diagonals,
            desorption,
            c_a: get(Param::Ca),
            c_d: get(Param::Cd),
            c_diff: get(Param::Cdiff),
            c_r: get(Param::Cr),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn rule(&self) -> RateRule {
        self.spec.rule
    }

    pub fn lattice(&self) -> &Lattice {
        &self.spec.lattice
    }

    pub fn n_sites(&self) -> usize {
        self.spec.lattice.n_sites()
    }

    pub fn species(&self) -> &SpeciesSet {
        &self.species
    }

    pub fn shape(&self) -> &NeighborhoodShape {
        &self.shape
    }

    pub fn neighbors(&self) -> &NeighborTable {
        &self.table
    }

    /// Sites whose neighborhood contains `w`; their events must be
    /// re-enumerated after `w` changes.
    #[inline]
    pub fn dependents(&self, w: usize) -> &[u32] {
        self.dependents.of(w)
    }

    pub fn dependents_table(&self) -> &NeighborTable {
        &self.dependents
    }

    /// Slots adjacent to each diagonal slot (1-based `D_i` sets of the
    /// evans_co rule, returned zero-based together with the diagonal slot).
    pub fn diagonal_sets(&self) -> &[(usize, Vec<usize>)] {
        &self.diagonals
    }

    pub fn check_configuration(&self, sigma: &Configuration) -> Result<()> {
        if sigma.len() != self.n_sites() {
            return Err(Error::InvalidLattice(format!(
                "configuration has {} sites, lattice has {}",
                sigma.len(),
                self.n_sites()
            )));
        }
        sigma.validate(&self.species)
    }

    #[inline]
    fn nbr(&self, x: usize, slot: usize) -> usize {
        self.table.get(x, slot)
    }

    #[inline]
    fn occupied_axis_neighbors(&self, sigma: &Configuration, x: usize) -> usize {
        self.axis_slots
            .iter()
            .filter(|&&s| sigma.get(self.nbr(x, s)) == 1)
            .count()
    }

    /// Appends every positive-rate event anchored at `x`, in ascending kind order.
    pub fn site_events(&self, sigma: &Configuration, x: usize, out: &mut SiteEvents) {
        let mut push = |kind: usize, rate: f64| {
            if rate > 0.0 {
                out.push(SiteEvent {
                    kind: kind as u8,
                    rate,
                });
            }
        };
        let here = sigma.get(x);
        match self.spec.rule {
            RateRule::IsingAd | RateRule::AdDiffusion => {
                let flip_rate = if here == 0 {
                    self.c_a
                } else {
                    self.desorption[self.occupied_axis_neighbors(sigma, x)]
                };
                push(0, flip_rate);
                if self.spec.rule == RateRule::AdDiffusion && here == 1 {
                    for (j, &s) in self.axis_slots.iter().enumerate() {
                        if sigma.get(self.nbr(x, s)) == 0 {
                            push(1 + j, self.c_diff);
                        }
                    }
                }
            }
            RateRule::Zgb => {
                if here == VACANT {
                    push(0, self.c_a);
                    for (j, &s) in self.axis_slots.iter().enumerate() {
                        if sigma.get(self.nbr(x, s)) == VACANT {
                            push(1 + j, 1.0 - self.c_a);
                        }
                    }
                } else {
                    for (j, &s) in self.axis_slots.iter().enumerate() {
                        if sigma.get(self.nbr(x, s)) == -here {
                            push(5 + j, self.c_r);
                        }
                    }
                }
            }
            RateRule::EvansCo => {
                if here == VACANT {
                    push(0, self.c_a);
                    for (j, (diag, adj)) in self.diagonals.iter().enumerate() {
                        let clear = sigma.get(self.nbr(x, *diag)) == VACANT
                            && adj.iter().all(|&s| sigma.get(self.nbr(x, s)) == VACANT);
                        if clear {
                            push(1 + j, 1.0 - self.c_a);
                        }
                    }
                } else {
                    if here == CO {
                        for (j, &s) in self.axis_slots.iter().enumerate() {
                            if sigma.get(self.nbr(x, s)) == VACANT {
                                push(5 + j, self.c_diff);
                            }
                        }
                        push(9, self.c_d);
                    }
                    for (j, &s) in self.axis_slots.iter().enumerate() {
                        if sigma.get(self.nbr(x, s)) == -here {
                            push(10 + j, self.c_r);
                        }
                    }
                }
            }
        }
    }

    /// Sites changed by event `kind` at `x`, with their new values.
    pub fn writes(&self, sigma: &Configuration, x: usize, kind: u8) -> Writes {
        let k = kind as usize;
        let mut w = Writes::new();
        let x32 = x as u32;
        match self.spec.rule {
            RateRule::IsingAd | RateRule::AdDiffusion => {
                if k == 0 {
                    w.push((x32, 1 - sigma.get(x)));
                } else {
                    let y = self.nbr(x, self.axis_slots[k - 1]);
                    w.push((x32, 0));
                    w.push((y as u32, 1));
                }
            }
            RateRule::Zgb => match k {
                0 => w.push((x32, CO)),
                1..=4 => {
                    w.push((x32, O));
                    w.push((self.nbr(x, self.axis_slots[k - 1]) as u32, O));
                }
                _ => {
                    w.push((x32, VACANT));
                    w.push((self.nbr(x, self.axis_slots[k - 5]) as u32, VACANT));
                }
            },
            RateRule::EvansCo => match k {
                0 => w.push((x32, CO)),
                1..=4 => {
                    w.push((x32, O));
                    w.push((self.nbr(x, self.diagonals[k - 1].0) as u32, O));
                }
                5..=8 => {
                    w.push((x32, VACANT));
                    w.push((self.nbr(x, self.axis_slots[k - 5]) as u32, CO));
                }
                9 => w.push((x32, VACANT)),
                _ => {
                    w.push((x32, VACANT));
                    w.push((self.nbr(x, self.axis_slots[k - 10]) as u32, VACANT));
                }
            },
        }
        w
    }

    /// Human-readable mechanism name for an event kind.
    pub fn kind_label(&self, kind: u8) -> &'static str {
        match (self.spec.rule, kind) {
            (RateRule::IsingAd | RateRule::AdDiffusion, 0) => "flip",
            (RateRule::AdDiffusion, _) => "hop",
            (RateRule::Zgb | RateRule::EvansCo, 0) => "co_adsorption",
            (RateRule::Zgb | RateRule::EvansCo, 1..=4) => "o2_adsorption",
            (RateRule::Zgb, _) => "reaction",
            (RateRule::EvansCo, 5..=8) => "co_hop",
            (RateRule::EvansCo, 9) => "co_desorption",
            (RateRule::EvansCo, _) => "reaction",
            (RateRule::IsingAd, _) => "unknown",
        }
    }

    /// Full `(x, ω)` form of event `kind` at `x`.
    pub fn event_of(&self, sigma: &Configuration, x: usize, kind: u8) -> Event {
        let hood = self.table.of(x);
        let mut omega: Vec<Species> = hood.iter().map(|&y| sigma.get(y as usize)).collect();
        for (site, value) in self.writes(sigma, x, kind) {
            for (slot, &y) in hood.iter().enumerate() {
                if y == site {
                    omega[slot] = value;
                }
            }
        }
        Event {
            site: x,
            omega: LocalConfiguration(omega),
        }
    }

    /// All positive-rate events `Ω(σ)` with their rates, ordered by site then kind.
    pub fn enumerate_events(&self, sigma: &Configuration) -> Vec<(Event, f64)> {
        let mut out = Vec::new();
        let mut buf = SiteEvents::new();
        for x in 0..self.n_sites() {
            buf.clear();
            self.site_events(sigma, x, &mut buf);
            out.extend(
                buf.iter()
                    .map(|e| (self.event_of(sigma, x, e.kind), e.rate)),
            );
        }
        out
    }

    /// `λ(σ;θ)` by direct summation over all sites.
    pub fn total_rate(&self, sigma: &Configuration) -> f64 {
        let mut buf = SiteEvents::new();
        (0..self.n_sites())
            .map(|x| {
                buf.clear();
                self.site_events(sigma, x, &mut buf);
                buf.iter().map(|e| e.rate).sum::<f64>()
            })
            .sum()
    }

    /// Applies the writes of event `kind` at `x` in place.
    pub fn apply(&self, sigma: &mut Configuration, x: usize, kind: u8) -> Writes {
        let w = self.writes(sigma, x, kind);
        for &(y, v) in &w {
            sigma.set(y as usize, v);
        }
        w
    }
}

/// Adsorption/desorption rate `c_I(x, σ)` of the Ising lattice gas.
///
/// On a 2D lattice the neighbor sum runs over the four axis neighbors.
pub fn ising_rate(
    x: usize,
    sigma: &Configuration,
    theta: &ParameterVector,
    lattice: &Lattice,
) -> Result<f64> {
    lattice.check_site(x)?;
    if sigma.get(x) == 0 {
        return theta.require(Param::Ca);
    }
    let beta = theta.require(Param::Beta)?;
    let j = theta.require(Param::J)?;
    let h = theta.require(Param::H)?;
    let cd = theta.require(Param::Cd)?;
    let neighbors: i32 = lattice
        .axis_units()
        .into_iter()
        .flat_map(|u| [u, [-u[0], -u[1]]])
        .map(|o| sigma.get(lattice.shift(x, o)) as i32)
        .sum();
    Ok(cd * (-beta * (j * neighbors as f64 - h)).exp())
}

/// Exchange rate `c_D(x, y, σ)` moving a particle from `x` to a vacant `y`.
pub fn diffusion_rate(
    x: usize,
    y: usize,
    sigma: &Configuration,
    theta: &ParameterVector,
    lattice: &Lattice,
) -> Result<f64> {
    lattice.check_site(x)?;
    lattice.check_site(y)?;
    if lattice.distance(x, y) == 1 && sigma.get(x) == 1 && sigma.get(y) == 0 {
        theta.require(Param::Cdiff)
    } else {
        Ok(0.0)
    }
}

/// Events anchored at `x` under the ZGB rule.
pub fn zgb_events(
    x: usize,
    sigma: &Configuration,
    theta: &ParameterVector,
    lattice: &Lattice,
) -> Result<Vec<(Event, f64)>> {
    anchored_events(RateRule::Zgb, x, sigma, theta, lattice)
}

/// Events anchored at `x` under the CO oxidation rule with diffusion.
pub fn evans_events(
    x: usize,
    sigma: &Configuration,
    theta: &ParameterVector,
    lattice: &Lattice,
) -> Result<Vec<(Event, f64)>> {
    anchored_events(RateRule::EvansCo, x, sigma, theta, lattice)
}

fn anchored_events(
    rule: RateRule,
    x: usize,
    sigma: &Configuration,
    theta: &ParameterVector,
    lattice: &Lattice,
) -> Result<Vec<(Event, f64)>> {
    lattice.check_site(x)?;
    let model = ModelSpec::new(rule, lattice.clone(), *theta).build()?;
    model.check_configuration(sigma)?;
    let mut buf = SiteEvents::new();
    model.site_events(sigma, x, &mut buf);
    Ok(buf
        .iter()
        .map(|e| (model.event_of(sigma, x, e.kind), e.rate))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::apply_update;
    use proptest::prelude::*;

    fn ising_params() -> ParameterVector {
        ParameterVector::new()
            .with(Param::Beta, 1.0)
            .with(Param::J, 1.0)
            .with(Param::H, 1.0)
            .with(Param::Ca, 1.0)
            .with(Param::Cd, 1.0)
    }

    fn zgb_params() -> ParameterVector {
        ParameterVector::new()
            .with(Param::Ca, 0.4)
            .with(Param::Cr, 2.0)
    }

    fn evans_params() -> ParameterVector {
        ParameterVector::new()
            .with(Param::Ca, 0.4)
            .with(Param::Cr, 2.0)
            .with(Param::Cd, 0.3)
            .with(Param::Cdiff, 5.0)
    }

    #[test]
    fn ising_all_vacant_has_adsorption_only() {
        let lat = Lattice::one_d(3).unwrap();
        let model = ModelSpec::new(RateRule::IsingAd, lat, ising_params().with(Param::Ca, 0.7))
            .build()
            .unwrap();
        let events = model.enumerate_events(&Configuration::filled(3, 0));
        assert_eq!(events.len(), 3);
        for (i, (e, r)) in events.iter().enumerate() {
            assert_eq!(e.site, i);
            assert_eq!(e.omega.0[0], 1);
            assert_eq!(*r, 0.7);
        }
    }

    #[test]
    fn ising_rate_values() {
        let lat = Lattice::one_d(3).unwrap();
        let theta = ising_params();
        let s = Configuration::from_vec(vec![0, 1, 0]);
        assert!((ising_rate(1, &s, &theta, &lat).unwrap() - 1f64.exp()).abs() < 1e-12);
        assert_eq!(ising_rate(0, &s, &theta, &lat).unwrap(), 1.0);
        let s = Configuration::from_vec(vec![1, 1, 1]);
        assert!((ising_rate(1, &s, &theta, &lat).unwrap() - (-1f64).exp()).abs() < 1e-12);
        assert!((ising_rate(1, &s, &theta, &lat).unwrap() - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn ising_rate_matches_compiled_model_in_2d() {
        let lat = Lattice::two_d(3, 4).unwrap();
        let model = ModelSpec::new(RateRule::IsingAd, lat.clone(), ising_params())
            .build()
            .unwrap();
        let s = Configuration::from_vec(vec![1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 0, 0]);
        let mut buf = SiteEvents::new();
        for x in 0..12 {
            buf.clear();
            model.site_events(&s, x, &mut buf);
            assert_eq!(buf.len(), 1);
            assert!(
                (buf[0].rate - ising_rate(x, &s, &ising_params(), &lat).unwrap()).abs() < 1e-12
            );
        }
    }

    #[test]
    fn diffusion_rate_values() {
        let lat = Lattice::one_d(5).unwrap();
        let theta = ising_params().with(Param::Cdiff, 2.5);
        let s = Configuration::from_vec(vec![1, 0, 0, 1, 1]);
        assert_eq!(diffusion_rate(0, 1, &s, &theta, &lat).unwrap(), 2.5);
        assert_eq!(diffusion_rate(0, 2, &s, &theta, &lat).unwrap(), 0.0);
        assert_eq!(diffusion_rate(3, 4, &s, &theta, &lat).unwrap(), 0.0);
        assert_eq!(diffusion_rate(4, 0, &s, &theta, &lat).unwrap(), 0.0);
        assert_eq!(diffusion_rate(3, 2, &s, &theta, &lat).unwrap(), 2.5);
    }

    #[test]
    fn ad_diffusion_two_site_events() {
        let lat = Lattice::one_d(2).unwrap();
        let theta = ising_params().with(Param::Cdiff, 3.0);
        let model = ModelSpec::new(RateRule::AdDiffusion, lat.clone(), theta)
            .build()
            .unwrap();
        let s = Configuration::from_vec(vec![1, 0]);
        let events = model.enumerate_events(&s);
        // desorption at 0, hop left and hop right (both land on site 1), adsorption at 1
        let hops: Vec<_> = events
            .iter()
            .filter(|(e, _)| e.site == 0 && e.omega.0[0] == 0)
            .collect();
        assert_eq!(hops.len(), 3);
        let shape = model.shape().clone();
        let mut hop_targets = 0;
        for (e, r) in &hops {
            let next = apply_update(&s, e, &lat, &shape).unwrap();
            if next.as_slice() == [0, 1] {
                assert_eq!(*r, 3.0);
                hop_targets += 1;
            } else {
                assert_eq!(next.as_slice(), &[0, 0]);
            }
        }
        assert_eq!(hop_targets, 2);
    }

    #[test]
    fn zgb_examples() {
        let lat = Lattice::two_d(4, 4).unwrap();
        let theta = zgb_params();
        let empty = Configuration::filled(16, 0);
        let ev = zgb_events(5, &empty, &theta, &lat).unwrap();
        assert_eq!(ev.len(), 5);
        assert_eq!(ev[0].1, 0.4);
        assert_eq!(ev[0].0.omega.0, vec![-1, 0, 0, 0, 0]);
        for (e, r) in &ev[1..] {
            assert!((r - 0.6).abs() < 1e-15);
            assert_eq!(e.omega.0[0], 1);
            assert_eq!(e.omega.0.iter().filter(|&&v| v == 1).count(), 2);
        }

        let mut s = Configuration::filled(16, 0);
        s.set(5, -1);
        let nb = lat.shift(5, [0, 1]);
        s.set(nb, 1);
        let ev = zgb_events(5, &s, &theta, &lat).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].1, 2.0);
        assert_eq!(ev[0].0.omega.0, vec![0, 0, 0, 0, 0]);

        let full = Configuration::filled(16, 1);
        assert!(zgb_events(5, &full, &theta, &lat).unwrap().is_empty());
    }

    #[test]
    fn evans_diagonal_sets() {
        let lat = Lattice::two_d(6, 6).unwrap();
        let model = ModelSpec::new(RateRule::EvansCo, lat, evans_params())
            .build()
            .unwrap();
        let one_based: Vec<(usize, Vec<usize>)> = model
            .diagonal_sets()
            .iter()
            .map(|(d, adj)| (d + 1, adj.iter().map(|a| a + 1).collect()))
            .collect();
        assert_eq!(
            one_based,
            vec![
                (3, vec![2, 4, 11, 12]),
                (5, vec![4, 6, 13, 14]),
                (7, vec![6, 8, 15, 16]),
                (9, vec![2, 8, 10, 17]),
            ]
        );
    }

    #[test]
    fn evans_examples() {
        let lat = Lattice::two_d(6, 6).unwrap();
        let theta = evans_params();
        let x = lat.site_at([2, 2]);
        let shape = NeighborhoodShape::evans_2d();
        let hood = crate::lattice::neighborhood_sites(&lat, &shape, x).unwrap();

        // empty lattice: one CO adsorption and all four O2 placements
        let empty = Configuration::filled(36, 0);
        let ev = evans_events(x, &empty, &theta, &lat).unwrap();
        assert_eq!(ev.len(), 5);
        let o2: Vec<_> = ev.iter().filter(|(e, _)| e.omega.0[0] == 1).collect();
        assert_eq!(o2.len(), 4);
        assert!(o2
            .iter()
            .any(|(e, r)| e.omega.0[2] == 1 && (r - 0.6).abs() < 1e-15));

        // blocking a site in D_3 removes the x_3 placement only
        let mut s = empty.clone();
        s.set(hood[10], 1);
        let ev = evans_events(x, &s, &theta, &lat).unwrap();
        assert_eq!(ev.iter().filter(|(e, _)| e.omega.0[0] == 1).count(), 3);
        assert!(!ev
            .iter()
            .any(|(e, _)| e.omega.0[0] == 1 && e.omega.0[2] == 1));

        // CO at x: desorption always, hop to each vacant axis neighbor
        let mut s = empty.clone();
        s.set(x, -1);
        let ev = evans_events(x, &s, &theta, &lat).unwrap();
        assert!(ev
            .iter()
            .any(|(e, r)| *r == 0.3 && e.omega.0.iter().all(|&v| v == 0)));
        let hops: Vec<_> = ev.iter().filter(|(_, r)| *r == 5.0).collect();
        assert_eq!(hops.len(), 4);
        assert!(hops
            .iter()
            .any(|(e, _)| e.omega.0[1] == -1 && e.omega.0[0] == 0));

        // CO next to O reacts with rate c_r
        s.set(hood[1], 1);
        let ev = evans_events(x, &s, &theta, &lat).unwrap();
        assert!(ev
            .iter()
            .any(|(e, r)| *r == 2.0 && e.omega.0[0] == 0 && e.omega.0[1] == 0));
    }

    #[test]
    fn zgb_requires_2d_and_valid_ca() {
        let spec = ModelSpec::new(RateRule::Zgb, Lattice::one_d(5).unwrap(), zgb_params());
        assert!(spec.build().is_err());
        let spec = ModelSpec::new(
            RateRule::Zgb,
            Lattice::two_d(4, 4).unwrap(),
            zgb_params().with(Param::Ca, 1.5),
        );
        assert!(spec.build().is_err());
        let spec = ModelSpec::new(
            RateRule::IsingAd,
            Lattice::one_d(4).unwrap(),
            ParameterVector::new().with(Param::Beta, 1.0),
        );
        assert!(spec.build().is_err());
    }

    fn random_config(rule: RateRule, n: usize, seed: u64) -> Configuration {
        let mut s = seed;
        let species = rule.species();
        let vals = species.values();
        Configuration::from_vec(
            (0..n)
                .map(|_| {
                    s = s
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    vals[((s >> 33) % vals.len() as u64) as usize]
                })
                .collect(),
        )
    }

    fn all_models() -> Vec<Model> {
        let ising = ising_params();
        vec![
            ModelSpec::new(RateRule::IsingAd, Lattice::one_d(9).unwrap(), ising)
                .build()
                .unwrap(),
            ModelSpec::new(
                RateRule::AdDiffusion,
                Lattice::two_d(4, 5).unwrap(),
                ising.with(Param::Cdiff, 1.5),
            )
            .build()
            .unwrap(),
            ModelSpec::new(RateRule::Zgb, Lattice::two_d(4, 4).unwrap(), zgb_params())
                .build()
                .unwrap(),
            ModelSpec::new(
                RateRule::EvansCo,
                Lattice::two_d(6, 5).unwrap(),
                evans_params(),
            )
            .build()
            .unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn rates_positive_and_updates_nontrivial(seed in any::<u64>()) {
            for model in all_models() {
                let s = random_config(model.rule(), model.n_sites(), seed);
                let events = model.enumerate_events(&s);
                let total: f64 = events.iter().map(|(_, r)| r).sum();
                prop_assert!((total - model.total_rate(&s)).abs() <= 1e-10 * total.max(1.0));
                for (e, r) in &events {
                    prop_assert!(*r > 0.0);
                    let next = apply_update(&s, e, model.lattice(), model.shape()).unwrap();
                    prop_assert_ne!(&next, &s);
                    next.validate(model.species()).unwrap();
                }
                prop_assert_eq!(model.enumerate_events(&s), events);
            }
        }

        #[test]
        fn writes_agree_with_local_configuration(seed in any::<u64>()) {
            for model in all_models() {
                let s = random_config(model.rule(), model.n_sites(), seed);
                let mut buf = SiteEvents::new();
                for x in 0..model.n_sites() {
                    buf.clear();
                    model.site_events(&s, x, &mut buf);
                    for e in &buf {
                        let event = model.event_of(&s, x, e.kind);
                        let via_omega = apply_update(&s, &event, model.lattice(), model.shape()).unwrap();
                        let mut via_writes = s.clone();
                        model.apply(&mut via_writes, x, e.kind);
                        prop_assert_eq!(via_omega, via_writes);
                    }
                }
            }
        }

        #[test]
        fn common_rate_scaling_scales_every_rate(seed in any::<u64>(), factor in 0.1f64..10.0) {
            let lat = Lattice::one_d(8).unwrap();
            let base = ising_params().with(Param::Ca, 0.6).with(Param::Cd, 1.3);
            let scaled = base.with(Param::Ca, 0.6 * factor).with(Param::Cd, 1.3 * factor);
            let a = ModelSpec::new(RateRule::IsingAd, lat.clone(), base).build().unwrap();
            let b = ModelSpec::new(RateRule::IsingAd, lat, scaled).build().unwrap();
            let s = random_config(RateRule::IsingAd, 8, seed);
            for ((ea, ra), (eb, rb)) in a.enumerate_events(&s).iter().zip(b.enumerate_events(&s).iter()) {
                prop_assert_eq!(ea, eb);
                prop_assert!((ra * factor - rb).abs() <= 1e-12 * rb);
            }
        }
    }
}
