use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Variant;
use crate::series::DAILY_DT;

/// Standard deviations of the truncated-normal random-walk proposals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalScales {
    pub sigma_y2: f64,
    pub rho_y1: f64,
    pub rho_y2: f64,
    pub rho_j1: f64,
    pub rho_j2: f64,
}

impl Default for ProposalScales {
    fn default() -> Self {
        Self {
            sigma_y2: 1.0,
            rho_y1: 0.02,
            rho_y2: 0.01,
            rho_j1: 0.05,
            rho_j2: 0.05,
        }
    }
}

/// Sampler settings. Loop counts are per iteration and per jump component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub n_iterations: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub rng_seed: u64,
    pub loops_birth_death: usize,
    pub loops_displacement: usize,
    pub loops_multiplicative: usize,
    pub loops_latent_ou: usize,
    pub increments_per_loop: usize,
    pub permutations_per_loop: usize,
    pub birth_prob: f64,
    pub proposal_scales: ProposalScales,
    /// `c²` of the multiplicative size move is this constant over the jump count.
    pub multiplicative_scale_constant: f64,
    /// Time unit `u` of the reversion reparameterisation `ρ = e^{−u/λ}`.
    pub rho_time_unit: f64,
    /// Write a checkpoint every this many iterations (0 disables).
    pub checkpoint_every: u64,
    /// Measure the first inter-arrival time from 0 rather than from `τ_1`.
    pub first_gap_from_zero: bool,
    /// Replace the data likelihood by a constant (samples the prior).
    pub prior_only: bool,
    /// Compare the cached log-likelihood with a full recomputation every
    /// this many iterations (0 disables).
    pub verify_every: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iterations: 10_000_000,
            burn_in: 9_000_000,
            thinning: 1,
            rng_seed: 0,
            loops_birth_death: 5,
            loops_displacement: 5,
            loops_multiplicative: 5,
            loops_latent_ou: 30,
            increments_per_loop: 100,
            permutations_per_loop: 100,
            birth_prob: 0.5,
            proposal_scales: ProposalScales::default(),
            multiplicative_scale_constant: 1.0,
            rho_time_unit: DAILY_DT,
            checkpoint_every: 100_000,
            first_gap_from_zero: false,
            prior_only: false,
            verify_every: 0,
        }
    }
}

/// Loop settings used for the three calibration windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    P2018to21,
    P2021to23,
    P2018to23,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2018-21" => Ok(Preset::P2018to21),
            "2021-23" => Ok(Preset::P2021to23),
            "2018-23" => Ok(Preset::P2018to23),
            _ => Err(Error::Config(format!(
                "unknown preset {s:?} (expected 2018-21, 2021-23 or 2018-23)"
            ))),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than n_iterations ({})",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be >= 1".into()));
        }
        if !(self.birth_prob > 0.0 && self.birth_prob < 1.0) {
            return Err(Error::Config("birth_prob must lie in (0, 1)".into()));
        }
        let s = &self.proposal_scales;
        if [s.sigma_y2, s.rho_y1, s.rho_y2, s.rho_j1, s.rho_j2]
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Config("proposal scales must be finite and >= 0".into()));
        }
        if !(self.multiplicative_scale_constant >= 0.0) {
            return Err(Error::Config("multiplicative_scale_constant must be >= 0".into()));
        }
        if !(self.rho_time_unit > 0.0 && self.rho_time_unit.is_finite()) {
            return Err(Error::Config("rho_time_unit must be > 0".into()));
        }
        Ok(())
    }

    /// Number of retained records.
    pub fn n_records(&self) -> u64 {
        (self.n_iterations - self.burn_in) / self.thinning
    }

    pub fn is_retained(&self, iteration: u64) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thinning)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Installs the loop counts used for a calibration window and variant.
    pub fn apply_preset(&mut self, preset: Preset, variant: Variant) {
        let four = variant.has_y2();
        let (bd, mult, latent, inc, perm) = match (preset, four) {
            (Preset::P2018to21, false) => (5, 5, 0, 0, 0),
            (Preset::P2018to21, true) => (5, 5, 30, 100, 100),
            (Preset::P2021to23, false) => (5, 5, 0, 0, 0),
            (Preset::P2021to23, true) => (1, 1, 200, 1, 2),
            (Preset::P2018to23, false) => (5, 5, 0, 0, 0),
            (Preset::P2018to23, true) => (5, 5, 30, 1, 2),
        };
        self.loops_birth_death = bd;
        self.loops_multiplicative = mult;
        self.loops_latent_ou = latent;
        self.increments_per_loop = inc;
        self.permutations_per_loop = perm;
        self.n_iterations = 10_000_000;
        self.burn_in = 9_000_000;
    }
}
