use thiserror::Error;

use mobility_extremes::evt::EvtError;
use mobility_extremes::graph::GraphError;
use mobility_extremes::indices::IndexError;
use mobility_extremes::ingest::IngestError;
use mobility_extremes::quantreg::QuantRegError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl CliError {
    /// 1 usage or config, 2 data (including I/O), 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn data(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<QuantRegError> for CliError {
    fn from(e: QuantRegError) -> Self {
        match e {
            QuantRegError::LengthMismatch { .. }
            | QuantRegError::NonFinite(_)
            | QuantRegError::TooFewObservations { .. }
            | QuantRegError::EmptyResponse => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<EvtError> for CliError {
    fn from(e: EvtError) -> Self {
        match e {
            EvtError::InvalidBlocks(_) | EvtError::InsufficientBlocks { .. } => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
