//! Augmented MCMC calibration.

pub mod config;
pub mod engine;
pub mod output;
pub mod state;

pub use config::{McmcConfig, Preset, ProposalScales};
pub use engine::{gibbs_step, Rho, Sampler, Side};
pub use state::{
    initial_latent, initial_params, param_names, param_values, params_from_values, ChainState,
    Counters, Move, MoveCount, MOVE_NAMES,
};
pub use output::{
    record_of, run_chain, run_chain_to_dir, run_chains_to_dir, ChainOutput, ChainRecord,
    ChainSummary, Checkpoint, RunFiles, CHAIN_FILE, CHECKPOINT_FILE, SUMMARY_FILE,
};
