use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad error class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least {need} atoms, got {got}")]
    TooFewAtoms { need: usize, got: usize },
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("kernel order {order} too small for alpha={alpha} at tol={tol:e}")]
    InsufficientOrder { alpha: f64, tol: f64, order: usize },
    #[error("x={0} is not a grid point of the kernel table")]
    NotOnGrid(f64),
    #[error("W assigns no mass to the gap ({from}, {to}]; merge these V atoms")]
    ZeroGapMass { from: f64, to: f64 },
    #[error("only {found} eigenvalues available, {requested} requested")]
    ScanExhausted { found: usize, requested: usize },
    #[error("bracket [{lo}, {hi}] did not converge")]
    BracketNotConverged { lo: f64, hi: f64 },
    #[error("lambda={lambda} is not an eigenvalue (relative boundary residual {residual:e})")]
    NotAnEigenvalue { lambda: f64, residual: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NotConverged { off_norm: f64, sweeps: usize },
    #[error("operator is singular")]
    SingularOperator,
    #[error("spectra come from different measures")]
    MeasureMismatch,
    #[error("need at least {need} terms, got {got}")]
    TooFewTerms { need: usize, got: usize },
    #[error("eigenvalue count mismatch: series {series}, oracle {oracle}")]
    CountMismatch { series: usize, oracle: usize },
    #[error("malformed table: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSpec(_)
            | Error::InvalidArgument(_)
            | Error::LengthMismatch { .. }
            | Error::TooFewAtoms { .. }
            | Error::EmptyMeasure
            | Error::NotOnGrid(_)
            | Error::ZeroGapMass { .. }
            | Error::MeasureMismatch
            | Error::Json(_) => ErrorClass::Input,
            Error::Io(_) | Error::Parse(_) => ErrorClass::Io,
            _ => ErrorClass::Numeric,
        }
    }
}
