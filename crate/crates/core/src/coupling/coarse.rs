use crate::catalog::DirtySites;
use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::models::Model;
use crate::rng::RngStream;
use crate::sumtree::SumTree;

use super::classify::{pick_event, Classifier, Side};
use super::Branch;

/// Stepper for class-based couplings on cells of `q` consecutive sites.
///
/// For every cell `i` and class `k` the aggregate rates `λ^A_{k,i}`,
/// `λ^B_{k,i}` are coupled through the three branches
/// `min(λ^A, λ^B)`, `λ^A - min`, `λ^B - min`; events inside the selected
/// (class, cell) set are then drawn independently for each moving process.
#[derive(Debug, Clone)]
pub struct CoarseStepper<'m> {
    a: Side<'m>,
    b: Side<'m>,
    cls: &'m Classifier,
    q: usize,
    k: usize,
    /// Per-class trees over per-site class rates, for each process. Empty
    /// when cells are single sites.
    trees_a: Vec<SumTree>,
    trees_b: Vec<SumTree>,
    /// `λ^A_{k,i}, λ^B_{k,i}` at `lam[(i * k_classes + k) * 2 + {0,1}]`.
    lam: Vec<f64>,
    cells: SumTree,
    dirty_a: DirtySites,
    dirty_b: DirtySites,
    dirty_cells: DirtySites,
}

impl<'m> CoarseStepper<'m> {
    pub fn new(
        model_a: &'m Model,
        model_b: &'m Model,
        cls: &'m Classifier,
        q: usize,
        sigma: Configuration,
        eta: Configuration,
    ) -> Result<Self> {
        let n = model_a.n_sites();
        super::Scheme::Coarse(q).validate(n)?;
        let a = Side::new(model_a, sigma, cls)?;
        let b = Side::new(model_b, eta, cls)?;
        let k = cls.n_classes();
        let m = n / q;
        let class_tree = |side: &Side, c: usize| {
            let w: Vec<f64> = (0..n).map(|x| class_rate(side, x, c as u8)).collect();
            SumTree::from_weights(&w)
        };
        let classes = if q == 1 { 0 } else { k };
        let trees_a = (0..classes).map(|c| class_tree(&a, c)).collect();
        let trees_b = (0..classes).map(|c| class_tree(&b, c)).collect();
        let mut s = Self {
            a,
            b,
            cls,
            q,
            k,
            trees_a,
            trees_b,
            lam: vec![0.0; m * k * 2],
            cells: SumTree::new(m),
            dirty_a: DirtySites::new(n),
            dirty_b: DirtySites::new(n),
            dirty_cells: DirtySites::new(m),
        };
        let rates: Vec<f64> = (0..m).map(|i| s.refresh_cell(i)).collect();
        s.cells = SumTree::from_weights(&rates);
        Ok(s)
    }

    pub fn sides(&self) -> (&Side<'m>, &Side<'m>) {
        (&self.a, &self.b)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn total_rate(&self) -> f64 {
        self.cells.total()
    }

    /// `(λ^A_{k,i}, λ^B_{k,i})`.
    pub fn class_rates(&self, cell: usize, class: usize) -> (f64, f64) {
        let j = (cell * self.k + class) * 2;
        (self.lam[j], self.lam[j + 1])
    }

    /// Recomputes the class rates of cell `i` and returns its coupled rate.
    fn refresh_cell(&mut self, i: usize) -> f64 {
        let (lo, hi) = (i * self.q, (i + 1) * self.q);
        let mut total = 0.0;
        for c in 0..self.k {
            let (la, lb) = if self.q == 1 {
                (
                    class_rate(&self.a, lo, c as u8),
                    class_rate(&self.b, lo, c as u8),
                )
            } else {
                (
                    self.trees_a[c].range_sum(lo, hi),
                    self.trees_b[c].range_sum(lo, hi),
                )
            };
            let j = (i * self.k + c) * 2;
            self.lam[j] = la;
            self.lam[j + 1] = lb;
            let m = la.min(lb);
            total += m + (la - m) + (lb - m);
        }
        total
    }

    pub fn jump(&mut self, rng: &mut RngStream) -> Result<Branch> {
        let i = self
            .cells
            .sample(rng.uniform())
            .ok_or_else(|| Error::Invariant("jump requested with zero coupled rate".into()))?;
        let mut target = rng.uniform() * self.cells.get(i);
        let mut chosen = None;
        'outer: for c in 0..self.k {
            let (la, lb) = self.class_rates(i, c);
            let m = la.min(lb);
            for (br, r) in [
                (Branch::Joint, m),
                (Branch::AOnly, la - m),
                (Branch::BOnly, lb - m),
            ] {
                if r < 0.0 {
                    return Err(Error::Invariant(format!(
                        "negative {br:?} branch rate {r} in cell {i}, class {c}"
                    )));
                }
                if r > 0.0 {
                    chosen = Some((c, br));
                    if target < r {
                        break 'outer;
                    }
                    target -= r;
                }
            }
        }
        let (class, branch) = chosen.ok_or_else(|| {
            Error::Invariant(format!("cell {i} selected with no positive branch"))
        })?;
        let (lo, hi) = (i * self.q, (i + 1) * self.q);

        // draw both events before applying either
        let mut pick = |tree: Option<&SumTree>, side: &Side| -> Result<(usize, u8)> {
            let x = match tree {
                Some(t) => t
                    .sample_in_range(lo, hi, rng.uniform())
                    .ok_or_else(|| Error::Invariant(format!("empty class {class} in cell {i}")))?,
                None => lo,
            };
            let kind = pick_event(side.events(x), rng.uniform(), |e| e.class as usize == class)
                .ok_or_else(|| Error::Invariant(format!("no class {class} event at site {x}")))?;
            Ok((x, kind))
        };
        let ev_a = match branch {
            Branch::BOnly => None,
            _ => Some(pick(self.trees_a.get(class), &self.a)?),
        };
        let ev_b = match branch {
            Branch::AOnly => None,
            _ => Some(pick(self.trees_b.get(class), &self.b)?),
        };

        self.dirty_cells.clear();
        if let Some((x, kind)) = ev_a {
            let w = self.a.apply(self.cls, x, kind);
            self.dirty_a.clear();
            self.dirty_a.extend(self.cls.dependents(), &w);
            for &y in self.dirty_a.sites() {
                let y = y as usize;
                self.a.enumerate_site(self.cls, y);
                for (c, t) in self.trees_a.iter_mut().enumerate() {
                    t.set(y, class_rate(&self.a, y, c as u8));
                }
                self.dirty_cells.insert((y / self.q) as u32);
            }
        }
        if let Some((x, kind)) = ev_b {
            let w = self.b.apply(self.cls, x, kind);
            self.dirty_b.clear();
            self.dirty_b.extend(self.cls.dependents(), &w);
            for &y in self.dirty_b.sites() {
                let y = y as usize;
                self.b.enumerate_site(self.cls, y);
                for (c, t) in self.trees_b.iter_mut().enumerate() {
                    t.set(y, class_rate(&self.b, y, c as u8));
                }
                self.dirty_cells.insert((y / self.q) as u32);
            }
        }
        for j in 0..self.dirty_cells.sites().len() {
            let cell = self.dirty_cells.sites()[j] as usize;
            let r = self.refresh_cell(cell);
            self.cells.set(cell, r);
        }
        Ok(branch)
    }
}

/// Total rate of class-`c` events anchored at `x`.
#[inline]
fn class_rate(side: &Side, x: usize, c: u8) -> f64 {
    side.events(x)
        .iter()
        .filter(|e| e.class == c)
        .map(|e| e.rate)
        .sum()
}
