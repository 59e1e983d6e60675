//! Observables, their per-event increments and the level-set partition that
//! groups events into coupling classes.
//!
//! Every observable is an affine combination `a·A(σ) + b·B(σ)` of two
//! integer site statistics (`A`, `B`), so increments are computed exactly as
//! integer changes and only scaled to reals at the end.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lattice::{apply_update, Configuration, Event, Lattice, NeighborhoodShape, Species};
use crate::models::{ModelSpec, Param};

/// Which observable is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    /// Fraction of sites not holding the vacant value.
    Coverage,
    /// Fraction of sites holding the given species.
    SpeciesCoverage(Species),
    /// `-J Σ_{<x,y>} σ(x)σ(y) - h Σ σ(x)` over nearest-neighbor bonds.
    Hamiltonian,
    /// `(1/N) Σ σ(x)σ(x + r e_0)`.
    PairCorrelation(usize),
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableKind::Coverage => f.write_str("coverage"),
            ObservableKind::SpeciesCoverage(s) => write!(f, "species_coverage({s})"),
            ObservableKind::Hamiltonian => f.write_str("hamiltonian"),
            ObservableKind::PairCorrelation(r) => write!(f, "pair_correlation({r})"),
        }
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |name: &str| -> Option<&str> {
            s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')
        };
        let bad = || Error::Config(format!("unknown observable `{s}`"));
        match s {
            "coverage" => return Ok(ObservableKind::Coverage),
            "hamiltonian" => return Ok(ObservableKind::Hamiltonian),
            _ => {}
        }
        if let Some(a) = arg("species_coverage") {
            return a
                .trim()
                .parse()
                .map(ObservableKind::SpeciesCoverage)
                .map_err(|_| bad());
        }
        if let Some(a) = arg("pair_correlation") {
            return a
                .trim()
                .parse()
                .map(ObservableKind::PairCorrelation)
                .map_err(|_| bad());
        }
        Err(bad())
    }
}

/// Integer site statistics `(A, B)` of a configuration, or their change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub a: i64,
    pub b: i64,
}

impl std::ops::Add for Counts {
    type Output = Counts;

    #[inline]
    fn add(self, other: Counts) -> Counts {
        Counts {
            a: self.a + other.a,
            b: self.b + other.b,
        }
    }
}

impl Counts {
    #[inline]
    pub fn is_zero(self) -> bool {
        self.a == 0 && self.b == 0
    }
}

/// An observable bound to a lattice.
#[derive(Debug, Clone)]
pub struct Observable {
    kind: ObservableKind,
    lattice: Lattice,
    vacant: Species,
    /// Coefficients of the `A` and `B` statistics; `None` means `A / N`.
    coef: Option<[f64; 2]>,
    n: f64,
    coef_exact: [BigRational; 2],
}

impl Observable {
    /// Builds `kind` for the given model; the Hamiltonian takes `J` and `h`
    /// from the model's parameters.
    pub fn new(kind: ObservableKind, model: &ModelSpec) -> Result<Self> {
        let lattice = model.lattice.clone();
        let species = model.species();
        let vacant = species.vacant().unwrap_or(0);
        let n = lattice.n_sites() as i64;
        let inv_n = || BigRational::new(BigInt::from(1), BigInt::from(n));
        let (coef, coef_exact) = match kind {
            ObservableKind::Coverage => (None, [inv_n(), BigRational::zero()]),
            ObservableKind::SpeciesCoverage(s) => {
                if !species.contains(s) {
                    return Err(Error::InvalidSpecies(s));
                }
                (None, [inv_n(), BigRational::zero()])
            }
            ObservableKind::PairCorrelation(r) => {
                if r == 0 || r >= lattice.sides()[0] {
                    return Err(Error::Config(format!(
                        "pair_correlation distance {r} must lie in 1..{}",
                        lattice.sides()[0]
                    )));
                }
                (None, [inv_n(), BigRational::zero()])
            }
            ObservableKind::Hamiltonian => {
                let j = model.params.get(Param::J).ok_or_else(|| {
                    Error::Config("hamiltonian observable needs parameter `J`".into())
                })?;
                let h = model.params.get(Param::H).ok_or_else(|| {
                    Error::Config("hamiltonian observable needs parameter `h`".into())
                })?;
                let exact = |v: f64| BigRational::from_f64(v).expect("finite parameter");
                (Some([-j, -h]), [exact(-j), exact(-h)])
            }
        };
        Ok(Self {
            kind,
            lattice,
            vacant,
            coef,
            n: n as f64,
            coef_exact,
        })
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    #[inline]
    fn site_stat(&self, v: Species) -> i64 {
        match self.kind {
            ObservableKind::Coverage => (v != self.vacant) as i64,
            ObservableKind::SpeciesCoverage(s) => (v == s) as i64,
            ObservableKind::Hamiltonian => v as i64,
            ObservableKind::PairCorrelation(_) => 0,
        }
    }

    /// Bond partner offsets; bond `(x, x + o)` is identified by `(x, o)`.
    fn bond_offsets(&self) -> Vec<[i32; 2]> {
        match self.kind {
            ObservableKind::Hamiltonian => self.lattice.axis_units(),
            ObservableKind::PairCorrelation(r) => vec![[r as i32, 0]],
            _ => Vec::new(),
        }
    }

    /// Offsets whose values can enter the increment of a write at a site.
    pub fn stencil(&self) -> Vec<[i32; 2]> {
        let mut out = vec![[0, 0]];
        for o in self.bond_offsets() {
            out.push(o);
            out.push([-o[0], -o[1]]);
        }
        out
    }

    /// The integer statistics of `σ`: `A` is the bond sum and `B` the site
    /// sum for the Hamiltonian, otherwise `A` is the only statistic.
    pub fn counts(&self, sigma: &Configuration) -> Counts {
        let site: i64 = sigma.as_slice().iter().map(|&v| self.site_stat(v)).sum();
        let mut bonds = 0i64;
        for o in self.bond_offsets() {
            for x in 0..sigma.len() {
                bonds += sigma.get(x) as i64 * sigma.get(self.lattice.shift(x, o)) as i64;
            }
        }
        match self.kind {
            ObservableKind::Hamiltonian => Counts { a: bonds, b: site },
            ObservableKind::PairCorrelation(_) => Counts { a: bonds, b: 0 },
            _ => Counts { a: site, b: 0 },
        }
    }

    /// Real value of given statistics.
    #[inline]
    pub fn value(&self, c: Counts) -> f64 {
        match self.coef {
            None => c.a as f64 / self.n,
            Some([ca, cb]) => c.a as f64 * ca + c.b as f64 * cb,
        }
    }

    /// Exact rational value of given statistics.
    pub fn value_exact(&self, c: Counts) -> BigRational {
        &self.coef_exact[0] * BigInt::from(c.a) + &self.coef_exact[1] * BigInt::from(c.b)
    }

    /// `f(σ)`.
    pub fn eval(&self, sigma: &Configuration) -> f64 {
        self.value(self.counts(sigma))
    }

    /// Change of the statistics when the listed sites of `σ` take new values.
    /// Sites may repeat only with the same new value.
    pub fn delta_counts(&self, sigma: &Configuration, writes: &[(u32, Species)]) -> Counts {
        let new_value = |y: usize| -> Species {
            writes
                .iter()
                .find(|&&(w, _)| w as usize == y)
                .map_or_else(|| sigma.get(y), |&(_, v)| v)
        };
        let mut d = Counts::default();
        let mut seen: smallvec::SmallVec<[u32; 4]> = smallvec::SmallVec::new();
        for &(w, v) in writes {
            if seen.contains(&w) {
                continue;
            }
            seen.push(w);
            let s = self.site_stat(v) - self.site_stat(sigma.get(w as usize));
            match self.kind {
                ObservableKind::Hamiltonian => d.b += s,
                ObservableKind::PairCorrelation(_) => {}
                _ => d.a += s,
            }
        }
        let offsets = self.bond_offsets();
        if offsets.is_empty() {
            return d;
        }
        let mut bonds: smallvec::SmallVec<[(usize, usize); 16]> = smallvec::SmallVec::new();
        for &(w, _) in writes {
            for (k, &o) in offsets.iter().enumerate() {
                for start in [w as usize, self.lattice.shift(w as usize, [-o[0], -o[1]])] {
                    if !bonds.contains(&(start, k)) {
                        bonds.push((start, k));
                    }
                }
            }
        }
        let mut db = 0i64;
        for (start, k) in bonds {
            let end = self.lattice.shift(start, offsets[k]);
            let before = sigma.get(start) as i64 * sigma.get(end) as i64;
            let after = new_value(start) as i64 * new_value(end) as i64;
            db += after - before;
        }
        d.a += db;
        d
    }

    /// `f(σ^{x,ω}) - f(σ)`.
    pub fn delta(
        &self,
        sigma: &Configuration,
        event: &Event,
        shape: &NeighborhoodShape,
    ) -> Result<f64> {
        let next = apply_update(sigma, event, &self.lattice, shape)?;
        let writes: Vec<(u32, Species)> = (0..sigma.len())
            .filter(|&y| next.get(y) != sigma.get(y))
            .map(|y| (y as u32, next.get(y)))
            .collect();
        Ok(self.value(self.delta_counts(sigma, &writes)))
    }
}

/// One set of a partition of the real line: an interval or a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed {
            v >= self.lo
        } else {
            v > self.lo
        };
        let below = if self.hi_closed {
            v <= self.hi
        } else {
            v < self.hi
        };
        above && below
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |v: f64| {
            if v == f64::INFINITY {
                "inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                v.to_string()
            }
        };
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            b(self.lo),
            b(self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

impl FromStr for Interval {
    type Err = Error;

    /// Parses `(a,b)`, `[a,b]`, `(a,b]`, `[a,b)` with `inf`/`-inf` bounds.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidPartition(format!("cannot parse interval `{s}`"));
        let t = s.trim();
        let lo_closed = match t.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match t.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let (a, b) = t[1..t.len() - 1].split_once(',').ok_or_else(bad)?;
        let num = |v: &str| -> Result<f64> {
            match v.trim() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(|_| bad()),
            }
        };
        Ok(Interval {
            lo: num(a)?,
            lo_closed,
            hi: num(b)?,
            hi_closed,
        })
    }
}

/// Ordered disjoint sets `J_1, ..., J_m` covering the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    sets: Vec<Interval>,
    default_signs: bool,
}

impl Default for Partition {
    /// `J_1 = (-∞,0)`, `J_2 = {0}`, `J_3 = (0,∞)`.
    fn default() -> Self {
        Self {
            sets: vec![
                Interval {
                    lo: f64::NEG_INFINITY,
                    lo_closed: false,
                    hi: 0.0,
                    hi_closed: false,
                },
                Interval {
                    lo: 0.0,
                    lo_closed: true,
                    hi: 0.0,
                    hi_closed: true,
                },
                Interval {
                    lo: 0.0,
                    lo_closed: false,
                    hi: f64::INFINITY,
                    hi_closed: false,
                },
            ],
            default_signs: true,
        }
    }
}

impl Partition {
    /// Validates that the sets are nonempty, pairwise disjoint and cover ℝ.
    pub fn new(sets: Vec<Interval>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidPartition("no sets given".into()));
        }
        if sets.len() > u8::MAX as usize {
            return Err(Error::InvalidPartition("too many sets".into()));
        }
        for s in &sets {
            if s.is_empty() || s.lo.is_nan() || s.hi.is_nan() {
                return Err(Error::InvalidPartition(format!("set {s} is empty")));
            }
            if (s.lo.is_infinite() && s.lo_closed) || (s.hi.is_infinite() && s.hi_closed) {
                return Err(Error::InvalidPartition(format!(
                    "set {s} cannot be closed at infinity"
                )));
            }
        }
        let mut sorted = sets.clone();
        sorted.sort_by(|a, b| {
            a.lo.total_cmp(&b.lo)
                .then_with(|| b.lo_closed.cmp(&a.lo_closed))
        });
        if sorted[0].lo != f64::NEG_INFINITY {
            return Err(Error::InvalidPartition(format!("gap below {}", sorted[0])));
        }
        for w in sorted.windows(2) {
            let (p, q) = (w[0], w[1]);
            if p.hi < q.lo || (p.hi == q.lo && !p.hi_closed && !q.lo_closed) {
                return Err(Error::InvalidPartition(format!("gap between {p} and {q}")));
            }
            if p.hi > q.lo || (p.hi == q.lo && p.hi_closed && q.lo_closed) {
                return Err(Error::InvalidPartition(format!("{p} overlaps {q}")));
            }
        }
        if sorted.last().map(|s| s.hi) != Some(f64::INFINITY) {
            return Err(Error::InvalidPartition(format!(
                "gap above {}",
                sorted.last().unwrap()
            )));
        }
        let default_signs = sets == Partition::default().sets;
        Ok(Self {
            sets,
            default_signs,
        })
    }

    pub fn parse(specs: &[&str]) -> Result<Self> {
        Self::new(
            specs
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn sets(&self) -> &[Interval] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Index of the set containing `v`.
    #[inline]
    pub fn classify(&self, v: f64) -> usize {
        if self.default_signs {
            return if v < 0.0 {
                0
            } else if v == 0.0 {
                1
            } else {
                2
            };
        }
        self.sets
            .iter()
            .position(|s| s.contains(v))
            .expect("partition covers the real line")
    }
}
