use thiserror::Error;

/// Errors raised anywhere in the sensing / beamforming pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("ambiguous estimate: objective is constant over the search grid")]
    AmbiguousEstimate,

    #[error("degenerate linearization: antennas {0} and {1} coincide")]
    DegenerateLinearization(usize, usize),

    #[error("invalid antenna pair ({a1}, {a2}) for N = {n}")]
    InvalidPair { a1: usize, a2: usize, n: usize },

    #[error("no feasible initialization after {attempts} attempts")]
    InfeasibleRegion { attempts: usize },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("exhaustive search over {subsets} subsets exceeds cap {cap}; use greedy mode")]
    ExhaustiveTooLarge { subsets: u128, cap: u128 },

    #[error("channel vector is zero")]
    ZeroChannel,

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
