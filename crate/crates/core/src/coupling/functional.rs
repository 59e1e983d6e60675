//! Exact evaluation of the functional
//! `F[c; f] = Σ c(e_A, e_B) Δf_A(e_A) Δf_B(e_B)` and of the feasibility
//! bounds `Σ_{e_B} c(e_A, e_B) ≤ c_A(e_A)`, `Σ_{e_A} c(e_A, e_B) ≤ c_B(e_B)`.
//!
//! Joint rates are represented as blocks: a block with weight `w` over event
//! sets `E_A`, `E_B` assigns `c(e_A, e_B) = w · c_A(e_A)/λ_A · c_B(e_B)/λ_B`
//! where `λ_A = Σ_{E_A} c_A`. Site-level couplings use singleton blocks and
//! class-based couplings one block per (cell, class). All arithmetic is in
//! exact rationals.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};

use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::models::Model;

use super::classify::{Classifier, Side};
use super::micro::{site_branches, MicroRule};
use super::{Branch, Scheme};

/// One event of one process with exact rate and observable increment.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTerm {
    pub site: u32,
    pub kind: u8,
    pub rate: BigRational,
    pub delta: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointBlock {
    pub weight: BigRational,
    pub a: Vec<EventTerm>,
    pub b: Vec<EventTerm>,
}

impl JointBlock {
    fn lambda(terms: &[EventTerm]) -> BigRational {
        terms
            .iter()
            .fold(BigRational::zero(), |acc, t| acc + &t.rate)
    }

    /// `Σ c_A Δf_A / λ_A` (zero on an empty side).
    fn mean_delta(terms: &[EventTerm]) -> BigRational {
        let lam = Self::lambda(terms);
        if lam.is_zero() {
            return BigRational::zero();
        }
        terms
            .iter()
            .fold(BigRational::zero(), |acc, t| acc + &t.rate * &t.delta)
            / lam
    }
}

/// Joint rates of a coupling at one state pair, plus all events of both
/// processes.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRates {
    pub blocks: Vec<JointBlock>,
    pub events_a: Vec<EventTerm>,
    pub events_b: Vec<EventTerm>,
}

/// Outcome of a feasibility check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    /// First violated bound, if any.
    pub violation: Option<String>,
}

impl Feasibility {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

impl CouplingRates {
    /// Multiplies every joint weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let f = BigRational::from_f64(factor).expect("finite factor");
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.weight = &b.weight * &f;
        }
        out
    }

    /// Checks `0 ≤ Σ_{e_B} c(e_A, e_B) ≤ c_A(e_A)` for every event of A and
    /// the symmetric bound for B, reporting the first violation.
    pub fn feasibility(&self) -> Feasibility {
        let side = |name: &str, pick: fn(&JointBlock) -> &[EventTerm], events: &[EventTerm]| {
            let mut rows: HashMap<(u32, u8), BigRational> = HashMap::new();
            for (n, block) in self.blocks.iter().enumerate() {
                if block.weight.is_negative() {
                    return Some(format!(
                        "block {n} has negative joint weight {}",
                        block.weight
                    ));
                }
                let terms = pick(block);
                let lam = JointBlock::lambda(terms);
                if lam.is_zero() {
                    if !block.weight.is_zero() {
                        return Some(format!("block {n} has joint weight on an empty {name} set"));
                    }
                    continue;
                }
                for t in terms {
                    let share = &block.weight * &t.rate / &lam;
                    *rows
                        .entry((t.site, t.kind))
                        .or_insert_with(BigRational::zero) += share;
                }
            }
            for e in events {
                let row = rows
                    .remove(&(e.site, e.kind))
                    .unwrap_or_else(BigRational::zero);
                if row > e.rate {
                    return Some(format!(
                        "{name} bound violated at site {}, kind {}: joint {} > rate {}",
                        e.site, e.kind, row, e.rate
                    ));
                }
            }
            rows.into_keys().next().map(|(s, k)| {
                format!("joint mass on nonexistent {name} event at site {s}, kind {k}")
            })
        };
        let violation =
            side("A", |b| &b.a, &self.events_a).or_else(|| side("B", |b| &b.b, &self.events_b));
        Feasibility { violation }
    }
}

/// `F[c; f]`.
pub fn functional_f(rates: &CouplingRates) -> BigRational {
    rates.blocks.iter().fold(BigRational::zero(), |acc, b| {
        acc + &b.weight * JointBlock::mean_delta(&b.a) * JointBlock::mean_delta(&b.b)
    })
}

fn exact(v: f64) -> BigRational {
    BigRational::from_f64(v).expect("finite rate")
}

fn terms(side: &Side, cls: &Classifier, x: usize) -> Vec<(EventTerm, u8)> {
    let f = cls.observable();
    side.events(x)
        .iter()
        .map(|e| {
            let w = side.model().writes(side.configuration(), x, e.kind);
            let d = f.delta_counts(side.configuration(), &w);
            (
                EventTerm {
                    site: x as u32,
                    kind: e.kind,
                    rate: exact(e.rate),
                    delta: f.value_exact(d),
                },
                e.class,
            )
        })
        .collect()
}

/// Joint rates of `scheme` at the state pair `(σ, η)`.
///
/// The uncoupled and trivial schemes have no joint rate; CRN has no
/// generator form and is rejected.
pub fn coupling_rates(
    scheme: Scheme,
    model_a: &Model,
    model_b: &Model,
    cls: &Classifier,
    sigma: &Configuration,
    eta: &Configuration,
) -> Result<CouplingRates> {
    let n = model_a.n_sites();
    scheme.validate(n)?;
    let a = Side::new(model_a, sigma.clone(), cls)?;
    let b = Side::new(model_b, eta.clone(), cls)?;
    let per_site_a: Vec<_> = (0..n).map(|x| terms(&a, cls, x)).collect();
    let per_site_b: Vec<_> = (0..n).map(|x| terms(&b, cls, x)).collect();
    let mut blocks = Vec::new();

    match scheme {
        Scheme::Crn => {
            return Err(Error::InvalidScheme(
                "common random numbers have no joint-rate form".into(),
            ))
        }
        Scheme::Uncoupled | Scheme::Trivial => {}
        Scheme::MicroUnopt | Scheme::MicroOpt => {
            let rule = if scheme == Scheme::MicroOpt {
                MicroRule::Optimized
            } else {
                MicroRule::Unoptimized
            };
            for x in 0..n {
                site_branches(a.events(x), b.events(x), rule, |kind, branch, rate| {
                    if branch == Branch::Joint && rate > 0.0 {
                        let find = |v: &[(EventTerm, u8)]| {
                            v.iter().find(|(t, _)| t.kind == kind).unwrap().0.clone()
                        };
                        blocks.push(JointBlock {
                            weight: exact(rate),
                            a: vec![find(&per_site_a[x])],
                            b: vec![find(&per_site_b[x])],
                        });
                    }
                    true
                });
            }
        }
        Scheme::Coarse(_) | Scheme::Macro => {
            let q = scheme.cell_size(n).expect("class-based scheme");
            for cell in 0..n / q {
                for class in 0..cls.n_classes() as u8 {
                    let collect = |v: &[Vec<(EventTerm, u8)>]| -> Vec<EventTerm> {
                        v[cell * q..(cell + 1) * q]
                            .iter()
                            .flatten()
                            .filter(|(_, c)| *c == class)
                            .map(|(t, _)| t.clone())
                            .collect()
                    };
                    let ta = collect(&per_site_a);
                    let tb = collect(&per_site_b);
                    let la = JointBlock::lambda(&ta);
                    let lb = JointBlock::lambda(&tb);
                    let weight = if la < lb { la } else { lb };
                    if !weight.is_zero() {
                        blocks.push(JointBlock {
                            weight,
                            a: ta,
                            b: tb,
                        });
                    }
                }
            }
        }
    }

    let flatten = |v: Vec<Vec<(EventTerm, u8)>>| v.into_iter().flatten().map(|(t, _)| t).collect();
    Ok(CouplingRates {
        blocks,
        events_a: flatten(per_site_a),
        events_b: flatten(per_site_b),
    })
}
