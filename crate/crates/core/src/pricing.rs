//! Futures prices under the risk-neutral dynamics and a Monte-Carlo check.
//!
//! Under the pricing measure each Gaussian factor follows
//! `dY = (−φ − Y/λ) dt + σ dW`, jump intensities are unchanged and jump
//! sizes are exponential with rate `β*`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GaussianOUParams, JumpComponentParams, ModelParams, ModelSpec};
use crate::rng;
use crate::seasonality::{evaluate_f, SeasonalCoefficients};

/// Drift premia `φ` and risk-neutral jump-size rates `β*`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskPremia {
    pub phi_y1: f64,
    #[serde(default)]
    pub phi_y2: Option<f64>,
    pub beta1_star: f64,
    pub beta2_star: f64,
}

impl RiskPremia {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if !(self.beta1_star > 0.0 && self.beta2_star > 0.0) {
            return Err(Error::domain("risk-neutral jump rates must be positive"));
        }
        if !spec.variant.has_y2() && self.phi_y2.is_some_and(|p| p != 0.0) {
            return Err(Error::domain("phi_y2 given for a model without Y2"));
        }
        Ok(())
    }
}

/// Factor levels at the valuation time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorLevels {
    pub y1: f64,
    #[serde(default)]
    pub y2: f64,
    pub j1: f64,
    pub j2: f64,
}

/// `E^Q[Y_T]` for a Gaussian factor with drift premium `phi`.
fn gaussian_mean(p: &GaussianOUParams, phi: f64, y: f64, h: f64) -> f64 {
    if p.is_brownian() {
        y - phi * h
    } else {
        let e = (-h / p.lambda).exp();
        y * e + phi * p.lambda * (-h / p.lambda).exp_m1()
    }
}

fn gaussian_variance(p: &GaussianOUParams, h: f64) -> f64 {
    if p.is_brownian() {
        p.sigma * p.sigma * h
    } else {
        -0.5 * p.lambda * p.sigma * p.sigma * (-2.0 * h / p.lambda).exp_m1()
    }
}

/// Intensity pieces `(a, b, θ)` covering `(t, T]`.
fn regime_pieces(p: &JumpComponentParams, cp: Option<f64>, t: f64, big_t: f64) -> Vec<(f64, f64, f64)> {
    match cp {
        Some(tc) if tc > t && tc < big_t => {
            vec![(t, tc, p.regime(0).theta), (tc, big_t, p.regime(1).theta)]
        }
        Some(tc) if tc >= big_t => vec![(t, big_t, p.regime(0).theta)],
        Some(_) => vec![(t, big_t, p.regime(1).theta)],
        None => vec![(t, big_t, p.theta)],
    }
}

/// `E^Q[J_T | J_t]`.
pub fn jump_mean(p: &JumpComponentParams, beta_star: f64, cp: Option<f64>, j: f64, t: f64, big_t: f64) -> f64 {
    let lam = p.lambda;
    let mut m = j * (-(big_t - t) / lam).exp();
    for (a, b, theta) in regime_pieces(p, cp, t, big_t) {
        // ∫_a^b e^{−(T−s)/λ} ds
        let w = lam * ((-(big_t - b) / lam).exp() - (-(big_t - a) / lam).exp());
        m += theta / beta_star * w;
    }
    m
}

/// Futures price for delivery at `big_t` seen from `t`.
pub fn futures_price(
    spec: &ModelSpec,
    params: &ModelParams,
    premia: &RiskPremia,
    coeffs: &SeasonalCoefficients,
    state: &FactorLevels,
    t: f64,
    big_t: f64,
) -> Result<f64> {
    if t > big_t {
        return Err(Error::domain(format!("valuation time {t} after maturity {big_t}")));
    }
    premia.validate(spec)?;
    let h = big_t - t;
    let cp = spec.change_point;
    let mut price = evaluate_f(coeffs, big_t) + gaussian_mean(&params.y1, premia.phi_y1, state.y1, h);
    if let Some(y2) = &params.y2 {
        price += gaussian_mean(y2, premia.phi_y2.unwrap_or(0.0), state.y2, h);
    }
    price += jump_mean(&params.j1, premia.beta1_star, cp, state.j1, t, big_t);
    price -= jump_mean(&params.j2, premia.beta2_star, cp, state.j2, t, big_t);
    Ok(price)
}

/// Monte-Carlo estimate and standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

const BLOCK: usize = 8192;

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }
}

fn sample_jumps<R: Rng>(
    rng: &mut R,
    p: &JumpComponentParams,
    beta_star: f64,
    cp: Option<f64>,
    t: f64,
    big_t: f64,
) -> f64 {
    // sizes are Exp(1)/β*; the scale and 1/λ are hoisted out of the jump loop
    let inv_lambda = 1.0 / p.lambda;
    let mut total = 0.0;
    for (a, b, theta) in regime_pieces(p, cp, t, big_t) {
        let mean = theta * (b - a);
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
        let (from, width) = ((a - big_t) * inv_lambda, (b - a) * inv_lambda);
        for _ in 0..n {
            let age = from + width * rng.random::<f64>();
            let xi: f64 = rng.sample(Exp1);
            total += xi * age.exp();
        }
    }
    total / beta_star
}

/// Simulates `P_T` under the pricing measure. Paths are grouped in blocks
/// of fixed size, each with its own stream, so the result does not depend on
/// the number of threads.
#[allow(clippy::too_many_arguments)]
pub fn mc_futures_oracle(
    spec: &ModelSpec,
    params: &ModelParams,
    premia: &RiskPremia,
    coeffs: &SeasonalCoefficients,
    state: &FactorLevels,
    t: f64,
    big_t: f64,
    n_paths: usize,
    rng_seed: u64,
) -> Result<McEstimate> {
    futures_price(spec, params, premia, coeffs, state, t, big_t)?;
    mc_expectation(n_paths, rng_seed, |rng| {
        simulate_terminal_price(rng, spec, params, premia, coeffs, state, t, big_t)
    })
}

/// Monte-Carlo estimate of `E^Q[J_T | J_t]` for one jump component.
#[allow(clippy::too_many_arguments)]
pub fn mc_jump_mean(
    p: &JumpComponentParams,
    beta_star: f64,
    cp: Option<f64>,
    j: f64,
    t: f64,
    big_t: f64,
    n_paths: usize,
    rng_seed: u64,
) -> Result<McEstimate> {
    if !(beta_star > 0.0) || t > big_t {
        return Err(Error::domain("need β* > 0 and t ≤ T"));
    }
    let decay = (-(big_t - t) / p.lambda).exp();
    mc_expectation(n_paths, rng_seed, |rng| {
        j * decay + sample_jumps(rng, p, beta_star, cp, t, big_t)
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_terminal_price<R: Rng>(
    rng: &mut R,
    spec: &ModelSpec,
    params: &ModelParams,
    premia: &RiskPremia,
    coeffs: &SeasonalCoefficients,
    state: &FactorLevels,
    t: f64,
    big_t: f64,
) -> f64 {
    let h = big_t - t;
    let cp = spec.change_point;
    let z: f64 = StandardNormal.sample(rng);
    let mut p = evaluate_f(coeffs, big_t)
        + gaussian_mean(&params.y1, premia.phi_y1, state.y1, h)
        + gaussian_variance(&params.y1, h).sqrt() * z;
    if let Some(y2) = &params.y2 {
        let z: f64 = StandardNormal.sample(rng);
        p += gaussian_mean(y2, premia.phi_y2.unwrap_or(0.0), state.y2, h) + gaussian_variance(y2, h).sqrt() * z;
    }
    let j1 = state.j1 * (-h / params.j1.lambda).exp()
        + sample_jumps(rng, &params.j1, premia.beta1_star, cp, t, big_t);
    let j2 = state.j2 * (-h / params.j2.lambda).exp()
        + sample_jumps(rng, &params.j2, premia.beta2_star, cp, t, big_t);
    p + j1 - j2
}

fn mc_expectation<F>(n_paths: usize, rng_seed: u64, draw: F) -> Result<McEstimate>
where
    F: Fn(&mut rand_xoshiro::Xoshiro256PlusPlus) -> f64 + Sync,
{
    if n_paths < 2 {
        return Err(Error::domain("need at least two Monte-Carlo paths"));
    }
    let blocks = n_paths.div_ceil(BLOCK);
    let parts: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::mc_stream(rng_seed, b as u64);
            let len = BLOCK.min(n_paths - b * BLOCK);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(draw(&mut rng));
            }
            m
        })
        .collect();
    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    let var = m.m2 / (m.n - 1.0);
    Ok(McEstimate {
        estimate: m.mean,
        std_error: (var / m.n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use approx::assert_abs_diff_eq;

    fn setup(variant: Variant) -> (ModelSpec, ModelParams, RiskPremia, SeasonalCoefficients, FactorLevels) {
        let spec = ModelSpec::new(variant, 2.0);
        let params = ModelParams {
            y1: GaussianOUParams::new(0.2, 30.0).unwrap(),
            y2: variant.has_y2().then(|| GaussianOUParams::new(0.5, 10.0).unwrap()),
            j1: JumpComponentParams::new(0.02, 100.0, 5.0),
            j2: JumpComponentParams::new(0.01, 40.0, 8.0),
        };
        let premia = RiskPremia {
            phi_y1: 3.0,
            phi_y2: variant.has_y2().then_some(-2.0),
            beta1_star: 0.2,
            beta2_star: 0.125,
        };
        let coeffs = SeasonalCoefficients::harmonic([50.0, 10.0, 5.0, 1.0, 2.0, 3.0]);
        let state = FactorLevels { y1: 4.0, y2: if variant.has_y2() { -1.5 } else { 0.0 }, j1: 6.0, j2: 2.0 };
        (spec, params, premia, coeffs, state)
    }

    #[test]
    fn zero_horizon_is_spot() {
        let (spec, params, premia, coeffs, s) = setup(Variant::FourFactor);
        let f = futures_price(&spec, &params, &premia, &coeffs, &s, 1.3, 1.3).unwrap();
        assert_abs_diff_eq!(f, evaluate_f(&coeffs, 1.3) + s.y1 + s.y2 + s.j1 - s.j2, epsilon = 1e-12);
        assert!(futures_price(&spec, &params, &premia, &coeffs, &s, 1.4, 1.3).is_err());
    }

    #[test]
    fn long_horizon_limit() {
        let (spec, params, mut premia, coeffs, s) = setup(Variant::ThreeFactor);
        premia.phi_y1 = 0.0;
        let big_t = 1000.0;
        let f = futures_price(&spec, &params, &premia, &coeffs, &s, 0.0, big_t).unwrap();
        let limit = evaluate_f(&coeffs, big_t) + 100.0 * 0.02 / 0.2 - 40.0 * 0.01 / 0.125;
        assert_abs_diff_eq!(f, limit, epsilon = 1e-9);
    }

    #[test]
    fn three_factor_equals_four_with_null_y2() {
        let (spec4, mut p4, mut pr4, coeffs, mut s4) = setup(Variant::FourFactor);
        let (spec3, p3, pr3, _, s3) = setup(Variant::ThreeFactor);
        p4.y1 = p3.y1;
        pr4.phi_y2 = Some(0.0);
        s4.y2 = 0.0;
        s4.y1 = s3.y1;
        let a = futures_price(&spec3, &p3, &pr3, &coeffs, &s3, 0.1, 0.9).unwrap();
        let b = futures_price(&spec4, &p4, &pr4, &coeffs, &s4, 0.1, 0.9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monotone_in_jump_levels() {
        let (spec, params, premia, coeffs, s) = setup(Variant::ThreeFactor);
        let f = |s: FactorLevels| futures_price(&spec, &params, &premia, &coeffs, &s, 0.0, 0.05).unwrap();
        assert!(f(FactorLevels { j1: s.j1 + 1.0, ..s }) > f(s));
        assert!(f(FactorLevels { j2: s.j2 + 1.0, ..s }) < f(s));
    }

    #[test]
    fn brownian_limit() {
        let (mut spec, mut params, premia, coeffs, s) = setup(Variant::FourFactor);
        spec.variant = Variant::BbPlus3ou;
        params.y2 = Some(GaussianOUParams::brownian(10.0));
        let base = futures_price(&spec, &params, &premia, &coeffs, &s, 0.0, 0.5).unwrap();
        params.y2 = Some(GaussianOUParams::new(1e9, 10.0).unwrap());
        spec.variant = Variant::FourFactor;
        let near = futures_price(&spec, &params, &premia, &coeffs, &s, 0.0, 0.5).unwrap();
        assert_abs_diff_eq!(base, near, epsilon = 1e-6);
    }

    #[test]
    fn deterministic_oracle_has_zero_error() {
        let (spec, mut params, premia, coeffs, s) = setup(Variant::FourFactor);
        params.y1.sigma = 0.0;
        params.y2.as_mut().unwrap().sigma = 0.0;
        params.j1.theta = 0.0;
        params.j2.theta = 0.0;
        let mc = mc_futures_oracle(&spec, &params, &premia, &coeffs, &s, 0.2, 0.7, 1000, 3).unwrap();
        let f = futures_price(&spec, &params, &premia, &coeffs, &s, 0.2, 0.7).unwrap();
        assert_eq!(mc.std_error, 0.0);
        assert_abs_diff_eq!(mc.estimate, f, epsilon = 1e-12);
    }

    #[test]
    fn oracle_agrees_and_scales() {
        let (spec, params, premia, coeffs, s) = setup(Variant::FourFactor);
        let f = futures_price(&spec, &params, &premia, &coeffs, &s, 0.0, 0.1).unwrap();
        let a = mc_futures_oracle(&spec, &params, &premia, &coeffs, &s, 0.0, 0.1, 50_000, 1).unwrap();
        assert!((a.estimate - f).abs() < 3.0 * a.std_error);
        let b = mc_futures_oracle(&spec, &params, &premia, &coeffs, &s, 0.0, 0.1, 100_000, 2).unwrap();
        let ratio = b.std_error / a.std_error;
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.1 * std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn change_point_compensator_splits() {
        let p = JumpComponentParams::new(0.05, 10.0, 1.0).with_change(50.0, 1.0);
        let whole = jump_mean(&p, 2.0, Some(0.5), 0.0, 0.0, 1.0);
        let w = |a: f64, b: f64| 0.05 * ((-(1.0 - b) / 0.05f64).exp() - (-(1.0 - a) / 0.05f64).exp());
        assert_abs_diff_eq!(whole, 10.0 / 2.0 * w(0.0, 0.5) + 50.0 / 2.0 * w(0.5, 1.0), epsilon = 1e-12);
    }
}
