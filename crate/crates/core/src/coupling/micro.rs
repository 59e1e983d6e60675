use crate::catalog::DirtySites;
use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::models::Model;
use crate::rng::RngStream;
use crate::sumtree::SumTree;

use super::classify::{ClassedEvent, Classifier, Side};
use super::Branch;

/// Joint-rate rule of a site-level coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicroRule {
    /// No joint jumps.
    Zero,
    /// `min(c_A, c_B)` for events with the same (site, kind).
    Unoptimized,
    /// As `Unoptimized`, but only when both increments share a class.
    Optimized,
}

impl MicroRule {
    #[inline]
    pub fn joint(self, a: &ClassedEvent, b: &ClassedEvent) -> f64 {
        match self {
            MicroRule::Zero => 0.0,
            MicroRule::Unoptimized => a.rate.min(b.rate),
            MicroRule::Optimized if a.class == b.class => a.rate.min(b.rate),
            MicroRule::Optimized => 0.0,
        }
    }
}

/// Branches at one site: `(kind, branch, rate)` in a fixed order (ascending
/// kind; joint, A-only, B-only), zero-rate branches included.
pub(crate) fn site_branches<F>(
    a: &[ClassedEvent],
    b: &[ClassedEvent],
    rule: MicroRule,
    mut visit: F,
) where
    F: FnMut(u8, Branch, f64) -> bool,
{
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ka = a.get(i).map_or(u8::MAX, |e| e.kind);
        let kb = b.get(j).map_or(u8::MAX, |e| e.kind);
        let cont = if ka == kb {
            let c = rule.joint(&a[i], &b[j]);
            let out = visit(ka, Branch::Joint, c)
                && visit(ka, Branch::AOnly, a[i].rate - c)
                && visit(ka, Branch::BOnly, b[j].rate - c);
            i += 1;
            j += 1;
            out
        } else if ka < kb {
            i += 1;
            visit(ka, Branch::AOnly, a[i - 1].rate)
        } else {
            j += 1;
            visit(kb, Branch::BOnly, b[j - 1].rate)
        };
        if !cont {
            return;
        }
    }
}

/// Stepper for the site-level couplings (including the zero-joint-rate
/// trivial coupling).
#[derive(Debug, Clone)]
pub struct MicroStepper<'m> {
    a: Side<'m>,
    b: Side<'m>,
    cls: &'m Classifier,
    rule: MicroRule,
    tree: SumTree,
    dirty_a: DirtySites,
    dirty_b: DirtySites,
    dirty: DirtySites,
}

impl<'m> MicroStepper<'m> {
    pub fn new(
        model_a: &'m Model,
        model_b: &'m Model,
        cls: &'m Classifier,
        rule: MicroRule,
        sigma: Configuration,
        eta: Configuration,
    ) -> Result<Self> {
        let a = Side::new(model_a, sigma, cls)?;
        let b = Side::new(model_b, eta, cls)?;
        let n = model_a.n_sites();
        let mut s = Self {
            a,
            b,
            cls,
            rule,
            tree: SumTree::new(n),
            dirty_a: DirtySites::new(n),
            dirty_b: DirtySites::new(n),
            dirty: DirtySites::new(n),
        };
        let rates: Vec<f64> = (0..n).map(|x| s.site_rate(x)).collect();
        s.tree = SumTree::from_weights(&rates);
        Ok(s)
    }

    pub fn sides(&self) -> (&Side<'m>, &Side<'m>) {
        (&self.a, &self.b)
    }

    /// Coupled rate `Σ (c + (c_A - c) + (c_B - c))` of the branches at `x`.
    pub fn site_rate(&self, x: usize) -> f64 {
        let mut total = 0.0;
        site_branches(self.a.events(x), self.b.events(x), self.rule, |_, _, r| {
            total += r;
            true
        });
        total
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    /// Draws the site and branch, applies it and updates the bookkeeping.
    pub fn jump(&mut self, rng: &mut RngStream) -> Result<Branch> {
        let x = self
            .tree
            .sample(rng.uniform())
            .ok_or_else(|| Error::Invariant("jump requested with zero coupled rate".into()))?;
        let mut target = rng.uniform() * self.tree.get(x);
        let mut chosen = None;
        let mut negative = None;
        site_branches(self.a.events(x), self.b.events(x), self.rule, |k, br, r| {
            if r < 0.0 {
                negative = Some((k, br, r));
                return false;
            }
            if r > 0.0 {
                chosen = Some((k, br));
                if target < r {
                    return false;
                }
                target -= r;
            }
            true
        });
        if let Some((k, br, r)) = negative {
            return Err(Error::Invariant(format!(
                "negative {br:?} branch rate {r} at site {x}, kind {k}"
            )));
        }
        let (kind, branch) = chosen.ok_or_else(|| {
            Error::Invariant(format!("site {x} selected with no positive branch"))
        })?;

        self.dirty.clear();
        if branch != Branch::BOnly {
            let w = self.a.apply(self.cls, x, kind);
            self.dirty_a.clear();
            self.dirty_a.extend(self.cls.dependents(), &w);
            for &y in self.dirty_a.sites() {
                self.a.enumerate_site(self.cls, y as usize);
                self.dirty.insert(y);
            }
        }
        if branch != Branch::AOnly {
            let w = self.b.apply(self.cls, x, kind);
            self.dirty_b.clear();
            self.dirty_b.extend(self.cls.dependents(), &w);
            for &y in self.dirty_b.sites() {
                self.b.enumerate_site(self.cls, y as usize);
                self.dirty.insert(y);
            }
        }
        for i in 0..self.dirty.sites().len() {
            let y = self.dirty.sites()[i] as usize;
            let r = self.site_rate(y);
            self.tree.set(y, r);
        }
        Ok(branch)
    }
}
