//! Per-site event lists with a sum tree over site totals.

use crate::lattice::{Configuration, NeighborTable, Species};
use crate::models::{Model, SiteEvent, SiteEvents};
use crate::sumtree::SumTree;

/// Default number of incremental refreshes between full rebuilds.
pub const DEFAULT_REBUILD_EVERY: u64 = 1_000_000;

/// Sites whose event lists must be re-enumerated after a set of writes.
///
/// Keeps a generation-stamped mark array so collecting is linear in the
/// number of dependents.
#[derive(Debug, Clone)]
pub struct DirtySites {
    stamp: Vec<u32>,
    generation: u32,
    sites: Vec<u32>,
}

impl DirtySites {
    pub fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            generation: 0,
            sites: Vec::new(),
        }
    }

    /// Starts a new, empty collection.
    pub fn clear(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        self.sites.clear();
    }

    /// Adds the dependents (per `table`) of every written site.
    pub fn extend(&mut self, table: &NeighborTable, writes: &[(u32, Species)]) {
        for &(w, _) in writes {
            for &y in table.of(w as usize) {
                self.insert(y);
            }
        }
    }

    #[inline]
    pub fn insert(&mut self, y: u32) {
        let slot = &mut self.stamp[y as usize];
        if *slot != self.generation {
            *slot = self.generation;
            self.sites.push(y);
        }
    }

    pub fn sites(&self) -> &[u32] {
        &self.sites
    }
}

/// The enumerated events `Ω(σ)` of one process with their rates.
#[derive(Debug, Clone)]
pub struct EventCatalog {
    events: Vec<SiteEvents>,
    site_rates: SumTree,
    dirty: DirtySites,
    refreshes: u64,
    rebuild_every: u64,
}

impl EventCatalog {
    pub fn new(model: &Model, sigma: &Configuration) -> Self {
        let n = model.n_sites();
        let mut cat = Self {
            events: vec![SiteEvents::new(); n],
            site_rates: SumTree::new(n),
            dirty: DirtySites::new(n),
            refreshes: 0,
            rebuild_every: DEFAULT_REBUILD_EVERY,
        };
        cat.rebuild(model, sigma);
        cat
    }

    pub fn with_rebuild_every(mut self, k: u64) -> Self {
        self.rebuild_every = k.max(1);
        self
    }

    /// `λ(σ;θ)`.
    #[inline]
    pub fn total_rate(&self) -> f64 {
        self.site_rates.total()
    }

    #[inline]
    pub fn site_events(&self, x: usize) -> &[SiteEvent] {
        &self.events[x]
    }

    #[inline]
    pub fn site_rate(&self, x: usize) -> f64 {
        self.site_rates.get(x)
    }

    pub fn site_tree(&self) -> &SumTree {
        &self.site_rates
    }

    /// Number of enumerated events.
    pub fn len(&self) -> usize {
        self.events.iter().map(|e| e.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_rate() == 0.0
    }

    fn enumerate_site(&mut self, model: &Model, sigma: &Configuration, x: usize) {
        let list = &mut self.events[x];
        list.clear();
        model.site_events(sigma, x, list);
        let total = list.iter().map(|e| e.rate).sum();
        self.site_rates.set(x, total);
    }

    /// Re-enumerates every site.
    pub fn rebuild(&mut self, model: &Model, sigma: &Configuration) {
        for x in 0..model.n_sites() {
            let list = &mut self.events[x];
            list.clear();
            model.site_events(sigma, x, list);
        }
        let totals: Vec<f64> = self
            .events
            .iter()
            .map(|l| l.iter().map(|e| e.rate).sum())
            .collect();
        self.site_rates = SumTree::from_weights(&totals);
        self.refreshes = 0;
    }

    /// Updates the catalog after `writes` were applied to give `sigma`.
    pub fn refresh(&mut self, model: &Model, sigma: &Configuration, writes: &[(u32, Species)]) {
        self.refreshes += 1;
        if self.refreshes >= self.rebuild_every {
            self.rebuild(model, sigma);
            return;
        }
        let mut dirty = std::mem::replace(&mut self.dirty, DirtySites::new(0));
        dirty.clear();
        dirty.extend(model.dependents_table(), writes);
        for &y in dirty.sites() {
            self.enumerate_site(model, sigma, y as usize);
        }
        self.dirty = dirty;
    }

    /// Event drawn with probability `rate / λ` from two uniforms; `None` if
    /// `λ = 0`.
    pub fn select(&self, u_site: f64, u_event: f64) -> Option<(usize, u8)> {
        let x = self.site_rates.sample(u_site)?;
        Some((x, pick_in_site(&self.events[x], u_event)))
    }
}

/// Kind drawn within a site's event list proportionally to rate.
#[inline]
pub fn pick_in_site(events: &[SiteEvent], u: f64) -> u8 {
    let total: f64 = events.iter().map(|e| e.rate).sum();
    let mut target = u * total;
    for e in &events[..events.len() - 1] {
        if target < e.rate {
            return e.kind;
        }
        target -= e.rate;
    }
    events[events.len() - 1].kind
}
