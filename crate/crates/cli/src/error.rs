use std::path::PathBuf;

use mpopf_conic::Status;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mpopf_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {msg}", path.display())]
    Table { path: PathBuf, msg: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{0}")]
    Usage(String),
    #[error("solver finished with status {0}")]
    Solver(Status),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 ok, 1 validation/infeasible, 2 I/O or parse, 3 numerical failure.
    pub fn exit_code(&self) -> u8 {
        use mpopf_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Schema(_) | E::Json(_) | E::Io(_) => 2,
                E::NoConvergence { .. }
                | E::SingularImpedance(_)
                | E::ZeroVoltage(_)
                | E::ZeroTrace(_) => 3,
                _ => 1,
            },
            CliError::Io { .. }
            | CliError::Csv { .. }
            | CliError::Table { .. }
            | CliError::Manifest(_)
            | CliError::Usage(_) => 2,
            CliError::Solver(s) => status_code(*s),
        }
    }
}

pub fn status_code(s: Status) -> u8 {
    match s {
        Status::Optimal => 0,
        Status::PrimalInfeasible | Status::DualInfeasible => 1,
        Status::IterationLimit | Status::NumericalFailure => 3,
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
