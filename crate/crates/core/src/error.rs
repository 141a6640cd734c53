use thiserror::Error;

pub type Result<T> = std::result::Result<T, QspError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QspError {
    #[error("invalid Fock cutoff {0}: at least two levels are required")]
    InvalidCutoff(usize),

    #[error("cutoff too small: {what} defect {defect:.3e} exceeds {limit:.1e}")]
    CutoffTooSmall {
        what: &'static str,
        defect: f64,
        limit: f64,
    },

    #[error("quadrature did not converge: panel refinement disagreement {0:.3e}")]
    QuadratureNonConvergence(f64),

    #[error("homodyne grid too narrow: {0:.3e} of the probability mass lies outside")]
    GridTooNarrow(f64),

    #[error("trace defect {0:.3e} is too large")]
    TraceDefect(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode collision: mode {0} used twice")]
    ModeCollision(usize),

    #[error("unknown mode {0}")]
    UnknownMode(usize),

    #[error("backend budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("zero-probability measurement branch (weight {0:.3e})")]
    ZeroProbabilityBranch(f64),

    #[error("extended-precision series lost accuracy: error bound {0:.3e}")]
    PrecisionInsufficient(f64),

    #[error("invalid graph pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical routine failed to converge: {0}")]
    NonConvergence(String),
}
