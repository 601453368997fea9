//! Exit-code mapping for the documented contract:
//! 1 input/parse, 2 contract violation, 3 numerical degeneracy.

use iscore::ampute::AmputeError;
use iscore::data::DataError;
use iscore::evaluate::EvalError;
use iscore::forest::ForestError;
use iscore::impute::ImputeError;
use iscore::inference::InferenceError;
use iscore::projection::ProjectionError;
use iscore::score::ScoreError;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Contract(String),
    Degenerate(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Contract(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Contract(m) | CliError::Degenerate(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::MissingCellSelected { .. } => CliError::Contract(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AmputeError> for CliError {
    fn from(e: AmputeError) -> Self {
        match e {
            AmputeError::CalibrationFailed { .. } => CliError::Degenerate(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ImputeError> for CliError {
    fn from(e: ImputeError) -> Self {
        match e {
            ImputeError::CouplingViolation { .. } | ImputeError::ShapeMismatch { .. } => {
                CliError::Contract(e.to_string())
            }
            ImputeError::DegenerateDesign { .. } => CliError::Degenerate(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        CliError::Degenerate(e.to_string())
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::TooFewRows(_) => CliError::Input(e.to_string()),
            _ => CliError::Degenerate(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::NothingToScore | ScoreError::InvalidParams(_) => {
                CliError::Input(e.to_string())
            }
            ScoreError::Coupling(inner) => inner.into(),
            ScoreError::Projection(inner) => inner.into(),
            ScoreError::Forest(inner) => inner.into(),
            ScoreError::Inference(inner) => inner.into(),
            ScoreError::EmptyClass(_) | ScoreError::AllGroupsSkipped => {
                CliError::Degenerate(e.to_string())
            }
        }
    }
}
