//! Coupled pairs of processes `(σ_t, η_t)` running under parameters `θ` and
//! `θ + ε`, and the diagnostic functional used to rank couplings.
//!
//! Schemes:
//!
//! * `uncoupled`: two independent simulations on separate random streams.
//! * `crn`: two independent simulations driven by identical copies of one
//!   random stream.
//! * `trivial`: the joint generator with zero joint rate (both processes in
//!   one event loop, never jumping together).
//! * `micro_unopt`, `micro_opt`: site-level couplings with joint rate
//!   `min(c_A, c_B)` for events matched by (site, kind); `micro_opt` only
//!   matches events whose observable increments fall in the same class.
//! * `coarse(q)`: class-level coupling on cells of `q` consecutive sites.
//! * `macro`: `coarse(N)`.

mod classify;
mod coarse;
mod functional;
mod micro;
mod runner;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use classify::{ClassedEvent, Classifier, Side};
pub use coarse::CoarseStepper;
pub use functional::{
    coupling_rates, functional_f, CouplingRates, EventTerm, Feasibility, JointBlock,
};
pub use micro::{MicroRule, MicroStepper};
pub use runner::{run_coupled_path, CoupledSetup, GridSample, PathStats};

/// Which branch of the three-way coupled mechanism fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Joint,
    AOnly,
    BOnly,
}

/// A coupling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Uncoupled,
    Crn,
    Trivial,
    MicroUnopt,
    MicroOpt,
    Coarse(usize),
    Macro,
}

impl Scheme {
    /// Checks the scheme against a lattice of `n` sites.
    pub fn validate(self, n: usize) -> Result<()> {
        if let Scheme::Coarse(q) = self {
            if q == 0 || q > n || !n.is_multiple_of(q) {
                return Err(Error::InvalidScheme(format!(
                    "cell size q = {q} must divide the lattice size N = {n}"
                )));
            }
        }
        Ok(())
    }

    /// Cell size for class-based schemes.
    pub fn cell_size(self, n: usize) -> Option<usize> {
        match self {
            Scheme::Coarse(q) => Some(q),
            Scheme::Macro => Some(n),
            _ => None,
        }
    }

    /// Scheme for a Fig.-style `q` sweep entry: `0` is the uncoupled
    /// baseline, `N` the macroscopic coupling.
    pub fn from_q(q: usize, n: usize) -> Result<Self> {
        let s = match q {
            0 => Scheme::Uncoupled,
            q if q == n => Scheme::Macro,
            q => Scheme::Coarse(q),
        };
        s.validate(n)?;
        Ok(s)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Uncoupled => f.pad("uncoupled"),
            Scheme::Crn => f.pad("crn"),
            Scheme::Trivial => f.pad("trivial"),
            Scheme::MicroUnopt => f.pad("micro_unopt"),
            Scheme::MicroOpt => f.pad("micro_opt"),
            Scheme::Coarse(q) => f.pad(&format!("coarse({q})")),
            Scheme::Macro => f.pad("macro"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let q = s
            .strip_prefix("coarse(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("coarse:"));
        if let Some(q) = q {
            return q
                .trim()
                .parse()
                .map(Scheme::Coarse)
                .map_err(|_| Error::InvalidScheme(format!("bad cell size in `{s}`")));
        }
        match s {
            "uncoupled" | "uncoupled_trivial" => Ok(Scheme::Uncoupled),
            "crn" => Ok(Scheme::Crn),
            "trivial" => Ok(Scheme::Trivial),
            "micro_unopt" => Ok(Scheme::MicroUnopt),
            "micro_opt" => Ok(Scheme::MicroOpt),
            "macro" => Ok(Scheme::Macro),
            other => Err(Error::InvalidScheme(format!("unknown scheme `{other}`"))),
        }
    }
}
