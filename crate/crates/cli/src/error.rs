use qsplab_core::QspError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] QspError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status: 2 bad input, 3 budget, 4 numerical quality, 1 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 1,
            CliError::Core(e) => match e {
                QspError::InvalidCutoff(_)
                | QspError::DimensionMismatch(_)
                | QspError::ModeCollision(_)
                | QspError::UnknownMode(_)
                | QspError::InvalidPattern(_)
                | QspError::InvalidParameter(_) => 2,
                QspError::BudgetExceeded(_) => 3,
                QspError::CutoffTooSmall { .. }
                | QspError::QuadratureNonConvergence(_)
                | QspError::GridTooNarrow(_)
                | QspError::TraceDefect(_)
                | QspError::ZeroProbabilityBranch(_)
                | QspError::PrecisionInsufficient(_)
                | QspError::NonConvergence(_) => 4,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Invalid("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::from(QspError::BudgetExceeded("x".into())).exit_code(),
            3
        );
        let e = QspError::CutoffTooSmall {
            what: "x",
            defect: 1.0,
            limit: 0.0,
        };
        assert_eq!(CliError::from(e).exit_code(), 4);
        assert_eq!(
            CliError::from(QspError::InvalidPattern("x".into())).exit_code(),
            2
        );
    }
}
