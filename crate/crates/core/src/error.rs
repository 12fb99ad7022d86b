use thiserror::Error;

/// Errors raised by the ensemble-bound machinery.
///
/// Variants fall into three families that the command-line front end maps
/// onto distinct exit codes: input validation, numerical-regime refusals,
/// and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {dim} is outside the supported range {min}..={max}")]
    DimensionOutOfRange { dim: usize, min: usize, max: usize },

    #[error("energy spectrum is not strictly ascending at index {index} (gap {gap:e})")]
    DegenerateSpectrum { index: usize, gap: f64 },

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("weight vector shape {shape} does not satisfy the theorem requirement ({required})")]
    ShapeViolation {
        shape: &'static str,
        required: &'static str,
    },

    #[error(
        "weight w_{index} is degenerate with a neighbour; the bound for this state is meaningless"
    )]
    DegenerateWeight { index: usize },

    #[error("index {index} is out of range: {reason}")]
    IndexOutOfRange { index: usize, reason: String },

    #[error("matrix is not unitary: max deviation of U^dagger U from identity is {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not symmetric: max asymmetry {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ensemble error {delta:e} exceeds the validity threshold g = {g:e}")]
    OutOfRegime { delta: f64, g: f64 },

    #[error("all weights are equal; the gap function g is undefined")]
    EqualWeights,

    #[error("permutation is not a single cycle times a reference permutation: {0}")]
    InvalidCycleStructure(String),

    #[error(
        "optimizer diverged at iteration {iteration}: cost rose for {streak} consecutive steps"
    )]
    Diverged { iteration: usize, streak: usize },

    #[error("no feasible grid point for resolution {resolution}")]
    InfeasibleGrid { resolution: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Coarse classification used by callers that need to distinguish
    /// bad input from numerically meaningless requests.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) | Error::Csv(_) => ErrorKind::Io,
            Error::OutOfRegime { .. } | Error::Diverged { .. } | Error::InfeasibleGrid { .. } => {
                ErrorKind::Regime
            }
            _ => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Regime,
    Io,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
