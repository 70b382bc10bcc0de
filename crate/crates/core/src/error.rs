use thiserror::Error;

use crate::agents::AgentError;
use crate::checkpoint::CheckpointError;
use crate::config::ConfigError;
use crate::market_data::DataError;
use crate::metrics::MetricsError;
use crate::options_pricing::PricingError;
use crate::portfolio::PortfolioError;
use crate::rl::RlError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("day {date} aborted: {source}")]
    DayAborted {
        date: chrono::NaiveDate,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Run(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable process exit code: 1 usage/config, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) => 2,
            Error::DayAborted { .. } => 3,
            _ => 3,
        }
    }
}
