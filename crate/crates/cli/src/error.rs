use std::path::PathBuf;

use thiserror::Error;

/// Failures that end a command, each with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {detail}")]
    Input { path: PathBuf, detail: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] cavsolve::Error),

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cavsolve::Error as E;
        match self {
            CliError::Input { .. } | CliError::Usage(_) => 2,
            CliError::Output { .. } => 1,
            CliError::Solver(e) => match e {
                E::AtomBudget { .. } => 4,
                E::Certification(_) => 5,
                E::InvalidBelief(_)
                | E::InvalidProblem(_)
                | E::DimensionMismatch { .. }
                | E::TableLookup(_)
                | E::NegInfConstraint { .. }
                | E::DuplicateAtom(_) => 2,
                _ => 1,
            },
        }
    }
}
