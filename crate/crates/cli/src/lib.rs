//! Command-line orchestration: config ingestion, run directories and
//! artifact emission for the solver and the estimate checks.

pub mod config;
pub mod run;

pub use config::{Command, RunConfig};
pub use run::{run, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Sorts a library error into configuration or runtime failure.
    pub fn from_core(e: sdl_core::Error) -> Self {
        use sdl_core::Error as E;
        match e {
            E::RangeViolation { .. }
            | E::EmptyMass
            | E::BoundViolation { .. }
            | E::InvalidField(_)
            | E::InvalidInitial(_)
            | E::DeltaOutOfRange(_)
            | E::InvalidStepConfig(_)
            | E::InvalidGrid(_)
            | E::Json(_) => CliError::Config(e.to_string()),
            E::Io(io) => CliError::Io(io),
            other => CliError::Solver(other.to_string()),
        }
    }

    /// 1 for configuration problems, 3 for solver and I/O faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}
