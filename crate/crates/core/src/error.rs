use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is rank deficient (smallest singular value {sigma_min:.3e} < {tol:.3e})")]
    RankDeficient { sigma_min: f64, tol: f64 },
    #[error("simplex breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("inner polyhedron is empty")]
    EmptyInner,
    #[error("polyhedron is unbounded")]
    Unbounded,
    #[error("vertex enumeration supports ambient dimension <= {max}, got {dim}")]
    TooHighDimensional { dim: usize, max: usize },
    #[error("linear program infeasible: {0}")]
    Infeasible(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("no stabilizing gains found after {0} attempts")]
    NoStabilizingGains(usize),
    #[error("no restart produced a certified point")]
    NoFeasiblePoint,
    #[error("state left finite range at t = {0}")]
    NonFiniteState(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
