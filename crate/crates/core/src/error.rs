use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by density construction, operator assembly and bound evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution spec `{spec}`: {reason}")]
    InvalidSpec { spec: String, reason: String },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid grid configuration: {0}")]
    InvalidGrid(String),

    #[error("density cannot be normalized (total mass {mass})")]
    Unnormalizable { mass: f64 },

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("grids are not aligned: {0}")]
    GridMismatch(String),

    #[error("grid overflow: {requested} nodes requested, limit is {limit}")]
    GridOverflow { requested: usize, limit: usize },

    #[error("variance is not positive ({variance:e})")]
    NonPositiveVariance { variance: f64 },

    #[error("grid inadequate: Sigma = {sigma_stat:e} is negative beyond tolerance")]
    GridInadequate { sigma_stat: f64 },

    #[error("density vanishes inside its support on nodes {start}..={end} (x in [{x_start}, {x_end}])")]
    InteriorZeros {
        start: usize,
        end: usize,
        x_start: f64,
        x_end: f64,
    },

    #[error(
        "score is unreliable on mass {invalid_mass:e} (limit {limit:e}); Fisher information is not available"
    )]
    ScoreUnavailable { invalid_mass: f64, limit: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("trivial modes could not be identified: {0}")]
    AmbiguousTrivialModes(String),

    #[error("support enumeration produced {atoms} atoms, cap is {cap}")]
    SupportCap { atoms: usize, cap: usize },

    #[error("product space has {size} tuples, cap is {cap}")]
    ProductCap { size: u128, cap: u128 },

    #[error("degenerate quantity: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
