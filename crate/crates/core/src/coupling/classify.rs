use smallvec::SmallVec;

use crate::error::Result;
use crate::lattice::{Configuration, NeighborTable, NeighborhoodShape, Species};
use crate::models::{Model, SiteEvents, Writes};
use crate::observables::{Counts, Observable, Partition};

/// Observable plus partition: assigns each event the class `k` with
/// `f(σ^{x,ω}) - f(σ) ∈ J_k`.
#[derive(Debug, Clone)]
pub struct Classifier {
    f: Observable,
    partition: Partition,
    /// Sites whose classified events change when a given site is written.
    dependents: NeighborTable,
}

impl Classifier {
    pub fn new(model: &Model, f: Observable, partition: Partition) -> Result<Self> {
        // an event at x writes inside its neighborhood; its increment reads the
        // observable stencil around each written site
        let mut offsets: Vec<[i32; 2]> = Vec::new();
        for s in model.shape().offsets() {
            for t in f.stencil() {
                let o = [-(s[0] + t[0]), -(s[1] + t[1])];
                if !offsets.contains(&o) {
                    offsets.push(o);
                }
            }
        }
        let dependents = NeighborTable::new(model.lattice(), &NeighborhoodShape::new(offsets)?)?;
        Ok(Self {
            f,
            partition,
            dependents,
        })
    }

    pub fn observable(&self) -> &Observable {
        &self.f
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn n_classes(&self) -> usize {
        self.partition.len()
    }

    pub fn dependents(&self) -> &NeighborTable {
        &self.dependents
    }

    #[inline]
    pub fn class_of(&self, sigma: &Configuration, writes: &[(u32, Species)]) -> u8 {
        let d = self.f.value(self.f.delta_counts(sigma, writes));
        self.partition.classify(d) as u8
    }
}

/// An event with its rate and observable class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassedEvent {
    pub kind: u8,
    pub class: u8,
    pub rate: f64,
}

pub type ClassedEvents = SmallVec<[ClassedEvent; 6]>;

/// One process of a coupled pair, with classified per-site events.
#[derive(Debug, Clone)]
pub struct Side<'m> {
    model: &'m Model,
    sigma: Configuration,
    events: Vec<ClassedEvents>,
    counts: Counts,
    jumps: u64,
    scratch: SiteEvents,
}

impl<'m> Side<'m> {
    pub fn new(model: &'m Model, sigma: Configuration, cls: &Classifier) -> Result<Self> {
        model.check_configuration(&sigma)?;
        let n = model.n_sites();
        let counts = cls.observable().counts(&sigma);
        let mut side = Self {
            model,
            sigma,
            events: vec![ClassedEvents::new(); n],
            counts,
            jumps: 0,
            scratch: SiteEvents::new(),
        };
        for x in 0..n {
            side.enumerate_site(cls, x);
        }
        Ok(side)
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn configuration(&self) -> &Configuration {
        &self.sigma
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    #[inline]
    pub fn events(&self, x: usize) -> &[ClassedEvent] {
        &self.events[x]
    }

    /// Re-enumerates and classifies the events anchored at `x`.
    pub fn enumerate_site(&mut self, cls: &Classifier, x: usize) {
        self.scratch.clear();
        self.model.site_events(&self.sigma, x, &mut self.scratch);
        let list = &mut self.events[x];
        list.clear();
        for e in &self.scratch {
            let w = self.model.writes(&self.sigma, x, e.kind);
            list.push(ClassedEvent {
                kind: e.kind,
                class: cls.class_of(&self.sigma, &w),
                rate: e.rate,
            });
        }
    }

    /// Applies event `kind` at `x`; the caller re-enumerates dependents.
    pub fn apply(&mut self, cls: &Classifier, x: usize, kind: u8) -> Writes {
        let w = self.model.writes(&self.sigma, x, kind);
        self.counts = self.counts + cls.observable().delta_counts(&self.sigma, &w);
        for &(y, v) in &w {
            self.sigma.set(y as usize, v);
        }
        self.jumps += 1;
        w
    }
}

/// Event within a site drawn proportionally to rate among events accepted by
/// `keep`; returns `None` when no accepted event has positive rate.
#[inline]
pub(crate) fn pick_event<F>(events: &[ClassedEvent], u: f64, keep: F) -> Option<u8>
where
    F: Fn(&ClassedEvent) -> bool,
{
    let total: f64 = events.iter().filter(|e| keep(e)).map(|e| e.rate).sum();
    if total <= 0.0 {
        return None;
    }
    let mut target = u * total;
    let mut last = None;
    for e in events.iter().filter(|e| keep(e)) {
        if target < e.rate {
            return Some(e.kind);
        }
        target -= e.rate;
        last = Some(e.kind);
    }
    last
}
