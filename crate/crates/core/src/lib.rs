//! Lattice kinetic Monte Carlo with coupled finite-difference sensitivity
//! estimation.

pub mod catalog;
pub mod coupling;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod models;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod sumtree;

pub use error::{Error, Result};
