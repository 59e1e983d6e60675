use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site index {site} out of range for lattice of {n} sites")]
    InvalidSite { site: usize, n: usize },

    #[error("local configuration has {got} entries, neighborhood has {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("species value {0} is not in the species set")]
    InvalidSpecies(i8),

    #[error("operation requires binary species {{0,1}}")]
    NonBinarySpecies,

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid neighborhood shape: {0}")]
    InvalidShape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid coupling scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("state space of {states} configurations exceeds the oracle budget of {budget}")]
    StateSpaceTooLarge { states: u128, budget: usize },

    #[error("oracle integration failed: {0}")]
    Integration(String),

    #[error("cannot merge estimator results: {0}")]
    Merge(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
