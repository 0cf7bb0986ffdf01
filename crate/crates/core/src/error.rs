use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("gap in daily series: expected {expected}, found {found}")]
    Gap { expected: NaiveDate, found: NaiveDate },

    #[error("row {row}: cannot parse {field} from {value:?}")]
    Parse {
        row: usize,
        field: String,
        value: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular design matrix: {0}")]
    Singular(String),

    /// A Metropolis-Hastings ratio came out as NaN. `dump` carries the
    /// serialised chain state at the moment of failure.
    #[error("non-finite acceptance ratio in {step} at iteration {iteration}")]
    NonFinite {
        step: &'static str,
        iteration: u64,
        dump: String,
    },

    /// A chain run stopped on a numerical failure; `checkpoint` names the
    /// last state written to disk.
    #[error("{source}; last checkpoint: {}", checkpoint.as_ref().map_or("none".into(), |p| p.display().to_string()))]
    Aborted {
        checkpoint: Option<PathBuf>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
