use std::path::PathBuf;

use thiserror::Error;

/// Which side of a sample pair was degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::X => f.write_str("x (B_n = 0)"),
            Side::Y => f.write_str("y (V_n = 0)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("degenerate sample: all entries of {0} are zero")]
    DegenerateSample(Side),

    #[error("sample contains NaN at index {0}")]
    NaN(usize),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("distribution catalogue: {0}")]
    Catalogue(String),

    #[error("{law} has no regularly varying tail model")]
    NoTailModel { law: String },

    #[error("{law}: E|Y|^{p} is infinite")]
    InfiniteMoment { law: String, p: f64 },

    #[error("{law}: EY^2 is infinite")]
    InfiniteVariance { law: String },

    #[error("{law}: {what} is not available for this law")]
    Unsupported { law: String, what: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("iteration budget of {0} exceeded")]
    IterationBudget(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}, line {line}: {msg}")]
    Parse { context: String, line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
