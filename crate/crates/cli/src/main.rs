//! `spotfactor` command-line front end.
//!
//! Pipeline: `fit-seasonal` → `calibrate` → `diagnose` / `simulate` → `price`.
//! Exit codes: 0 success, 2 input error, 3 missing artifact, 4 numerical abort.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use spotfactor_core::mcmc::Preset;
use spotfactor_core::model::Variant;

#[derive(Parser, Debug)]
#[command(name = "spotfactor", version, about = "Factor models for daily electricity spot prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Least-squares seasonal curve and deseasonalised series.
    FitSeasonal(FitSeasonalArgs),
    /// Augmented MCMC calibration of a factor model.
    Calibrate(CalibrateArgs),
    /// Simulated paths and per-time quantile fan.
    Simulate(SimulateArgs),
    /// Posterior summaries, predictive p-values and data autocorrelation.
    Diagnose(DiagnoseArgs),
    /// Futures prices over a maturity grid.
    Price(PriceArgs),
}

#[derive(Args, Debug)]
pub struct FitSeasonalArgs {
    /// Daily price CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "date")]
    pub date_column: String,
    #[arg(long, default_value = "price")]
    pub price_column: String,
    /// Trend break (repeatable).
    #[arg(long = "knot", value_name = "DATE")]
    pub knots: Vec<NaiveDate>,
    /// Fit on the days before DATE only; the curve is extrapolated past it.
    #[arg(long, value_name = "DATE")]
    pub split: Option<NaiveDate>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Deseasonalised CSV as written by `fit-seasonal`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "x")]
    pub column: String,
    #[arg(long, default_value = "3ou")]
    pub variant: Variant,
    #[arg(long, value_name = "DATE")]
    pub change_point: Option<NaiveDate>,
    /// Calibrate on the days before DATE only.
    #[arg(long, value_name = "DATE")]
    pub split: Option<NaiveDate>,
    /// Prior specification (TOML or JSON).
    #[arg(long)]
    pub priors: Option<PathBuf>,
    /// Sampler configuration (TOML or JSON).
    #[arg(long)]
    pub mcmc: Option<PathBuf>,
    /// Loop counts of a calibration window: 2018-21, 2021-23 or 2018-23.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Overrides `rng_seed` of the sampler configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from a checkpoint written by an earlier run into `--out`.
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
    /// Independent chains, run concurrently in `chain_<k>` subdirectories.
    #[arg(long, default_value_t = 1)]
    pub chains: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Model file written by `calibrate` (or hand-written).
    #[arg(long)]
    pub model: PathBuf,
    /// Seasonal coefficients written by `fit-seasonal`.
    #[arg(long)]
    pub seasonal: PathBuf,
    #[arg(long, default_value_t = 365)]
    pub days: usize,
    #[arg(long, default_value_t = 200)]
    pub paths: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.25,0.5,0.75,0.95")]
    pub levels: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    pub max_lag: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Calibration output directory holding `chain.csv`.
    #[arg(long)]
    pub run: PathBuf,
    /// Deseasonalised data for the autocorrelation function.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "x")]
    pub column: String,
    #[arg(long, default_value_t = 30)]
    pub max_lag: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PriceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Risk premia JSON: phi_y1, phi_y2, beta1_star, beta2_star.
    #[arg(long)]
    pub premia: PathBuf,
    #[arg(long)]
    pub seasonal: PathBuf,
    /// Factor levels at the valuation time (JSON: y1, y2, j1, j2); zero if absent.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Valuation time in years from the seasonal origin.
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    /// Maturities in years from the seasonal origin.
    #[arg(long, value_delimiter = ',', required = true)]
    pub maturities: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::FitSeasonal(a) => commands::fit_seasonal(&a),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Price(a) => commands::price(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
