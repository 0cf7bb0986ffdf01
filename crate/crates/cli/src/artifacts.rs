use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spotfactor_core::model::{ModelParams, ModelSpec};
use spotfactor_core::Error;

pub const SEASONAL_FILE: &str = "seasonal.json";
pub const DESEASONALIZED_FILE: &str = "deseasonalized.csv";
pub const MODEL_FILE: &str = "model.json";
pub const RUN_FILE: &str = "run.json";
pub const PATH_FILE: &str = "path.csv";
pub const FAN_FILE: &str = "fan.csv";
pub const ACF_FILE: &str = "acf.csv";
pub const PVALUES_FILE: &str = "pvalues.csv";
pub const POSTERIOR_FILE: &str = "posterior.csv";
pub const FUTURES_FILE: &str = "futures.csv";

#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Missing(PathBuf),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Missing(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Failure::Input(anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) | Failure::Numerical(e) => write!(f, "{e}"),
            Failure::Missing(p) => write!(f, "missing artifact {}", p.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::Aborted { .. } => Failure::Numerical(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// An artifact produced by an earlier command; exit code 3 when absent.
pub fn require(path: &Path) -> CliResult<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Failure::Missing(path.to_path_buf()))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(require(path)?).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| {
        Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    })
}

pub fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io {
            path: dir.into(),
            source: e,
        }
        .into()
    })
}

/// Writes a headed CSV of pre-formatted rows.
pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(Error::from)?;
    for r in rows {
        w.write_record(&r).map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::input(e.to_string()))?;
    write_file(path, &bytes)
}

/// Model structure plus one parameter point, as consumed by `simulate` and
/// `price`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub spec: ModelSpec,
    pub params: ModelParams,
}

/// Calibration metadata written next to the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub input: PathBuf,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub n_observations: usize,
    pub chains: u64,
    pub seed: u64,
}
