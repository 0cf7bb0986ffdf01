//! Fixtures shared by the benchmarks.

use spotfactor_core::likelihood::PriorSpec;
use spotfactor_core::mcmc::{McmcConfig, Sampler};
use spotfactor_core::model::{
    simulate_spot, GaussianOUParams, JumpComponentParams, ModelParams, ModelSpec, SpotPath, Variant,
};
use spotfactor_core::seasonality::SeasonalCoefficients;
use spotfactor_core::series::DAILY_DT;

pub fn params(variant: Variant) -> ModelParams {
    ModelParams {
        y1: GaussianOUParams::new(0.05, 42.7).unwrap(),
        y2: variant.has_y2().then(|| GaussianOUParams::new(0.01, 20.0).unwrap()),
        j1: JumpComponentParams::new(0.006, 60.0, 4.0),
        j2: JumpComponentParams::new(0.002, 60.0, 7.0),
    }
}

pub fn spec(variant: Variant, days: usize) -> ModelSpec {
    ModelSpec::new(variant, days as f64 * DAILY_DT)
}

/// A simulated deseasonalised path of `days` increments.
pub fn path(variant: Variant, days: usize, seed: u64) -> SpotPath {
    simulate_spot(&params(variant), &SeasonalCoefficients::zero(), &spec(variant, days), days, DAILY_DT, seed).unwrap()
}

/// A sampler past a short burn-in on simulated data.
pub fn warm_sampler(variant: Variant, days: usize, warmup: u64) -> Sampler {
    let x = path(variant, days, 1).deseasonalized();
    let config = McmcConfig { rng_seed: 2, ..Default::default() };
    let mut s = Sampler::new(x, DAILY_DT, spec(variant, days), PriorSpec::default(), config).unwrap();
    for _ in 0..warmup {
        s.step().unwrap();
    }
    s
}
