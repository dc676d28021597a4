use thiserror::Error;

/// Failures surfaced by the command-line driver, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: D0 = {d0} is not above the distortion floor {floor}")]
    Infeasible { d0: f64, floor: f64 },
    #[error("statistical validation failed: {0}")]
    Validation(String),
    #[error("oracle disagreement: {0}")]
    Disagreement(String),
    #[error("{0}")]
    Solver(wsnpl_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 1 usage/config/solver/io, 2 infeasible, 3 statistical
    /// failure, 4 oracle disagreement.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Disagreement(_) => 4,
            _ => 1,
        }
    }
}

impl From<wsnpl_core::Error> for CliError {
    fn from(e: wsnpl_core::Error) -> Self {
        match e {
            wsnpl_core::Error::Infeasible { d0, floor } => CliError::Infeasible { d0, floor },
            wsnpl_core::Error::Configuration(msg) => CliError::Config(msg),
            other => CliError::Solver(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
