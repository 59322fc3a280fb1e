use thiserror::Error;

/// Errors raised across the library.
///
/// Variants fall into three groups that the command-line front end maps onto
/// distinct exit codes: I/O and parsing failures, validation failures of the
/// numerical inputs, and negative scientific verdicts (`NotMarkov`).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} exceeds the cap of {cap}", cap = crate::tensor::DIM_CAP)]
    DimensionCap(usize),

    #[error("label error: {0}")]
    Label(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    Hermiticity(f64),

    #[error("eigensolver did not converge after {0} sweeps")]
    Convergence(usize),

    #[error("not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("logarithm of a singular matrix (min eigenvalue {0:.3e})")]
    Singular(f64),

    #[error("trace is not 1 (got {0})")]
    NotUnitTrace(f64),

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("rank {rank} outside 1..={dim}")]
    Rank { rank: usize, dim: usize },

    #[error("marginal mismatch (deviation {0:.3e})")]
    MarginalMismatch(f64),

    #[error("state is not Markov: I(R;E|Q) = {cmi:.6} bits")]
    NotMarkov { cmi: f64 },

    #[error("channel output is not a state (min eigenvalue {0:.3e})")]
    NotAState(f64),

    #[error("steering probability {0:.3e} below floor")]
    ZeroProbability(f64),

    #[error("frame Gram matrix is singular (min eigenvalue {0:.3e})")]
    SingularGram(f64),

    #[error("post-selection map annihilates the maximally entangled input")]
    ZeroMap,

    #[error("invalid probability vector: {0}")]
    Simplex(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("marginal spectrum is degenerate (gap {0:.3e}); dephasing test inconclusive")]
    Degenerate(f64),

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("invalid isometry (deviation {0:.3e})")]
    NotIsometry(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
