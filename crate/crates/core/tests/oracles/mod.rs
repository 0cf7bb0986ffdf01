//! Direct, deliberately naive evaluations used as oracles for the library's
//! likelihood code. Nothing here calls into the likelihood module.
#![allow(dead_code)]

use rand::Rng;
use spotfactor_core::likelihood::{DominatingMeasure, ParamPrior, PriorFamily, PriorSpec};
use spotfactor_core::model::{
    GaussianOUParams, Jump, JumpComponentParams, LatentState, MarkedPointProcess, ModelParams,
    ModelSpec, Variant,
};
use statrs::distribution::{Continuous, Exp, Gamma, InverseGamma, Normal};

/// `Σ_{τ ≤ t} ξ e^{−(t−τ)/λ}` by brute force.
pub fn jump_value(lambda: f64, phi: &MarkedPointProcess, t: f64) -> f64 {
    phi.points()
        .iter()
        .filter(|j| j.tau <= t)
        .map(|j| j.xi * (-(t - j.tau) / lambda).exp())
        .sum()
}

pub fn jump_grid(lambda: f64, phi: &MarkedPointProcess, n: usize, dt: f64) -> Vec<f64> {
    (0..=n).map(|i| jump_value(lambda, phi, i as f64 * dt)).collect()
}

fn transition_sd(p: &GaussianOUParams, dt: f64) -> f64 {
    (p.sigma * p.sigma * p.lambda / 2.0 * (1.0 - (-2.0 * dt / p.lambda).exp())).sqrt()
}

pub fn y2_path(p: &GaussianOUParams, eps: &[f64], dt: f64) -> Vec<f64> {
    let a = (-dt / p.lambda).exp();
    let sd = transition_sd(p, dt);
    let mut y = vec![0.0];
    for e in eps {
        let last = *y.last().unwrap();
        y.push(a * last + sd * e);
    }
    y
}

/// Product of normal transition densities of `y1 = x − y2 − j1 + j2`.
pub fn gaussian_ll(x: &[f64], y2: &[f64], j1: &[f64], j2: &[f64], p: &GaussianOUParams, dt: f64) -> f64 {
    let y1: Vec<f64> = (0..x.len()).map(|i| x[i] - y2[i] - j1[i] + j2[i]).collect();
    let a = (-dt / p.lambda).exp();
    let sd = transition_sd(p, dt);
    (1..y1.len())
        .map(|i| Normal::new(a * y1[i - 1], sd).unwrap().ln_pdf(y1[i]))
        .sum()
}

/// Radon–Nikodym log density of a marked Poisson sample with respect to the
/// reference law, one factor per jump.
pub fn marked_pp_ll(
    phi: &MarkedPointProcess,
    p: &JumpComponentParams,
    horizon: f64,
    cp: Option<f64>,
    r: DominatingMeasure,
) -> f64 {
    let reference = Exp::new(1.0 / r.beta0).unwrap();
    let mut ll = 0.0;
    for j in phi.points() {
        let regime = match cp {
            Some(tc) if j.tau > tc => p.after_change.unwrap(),
            _ => p.regime(0),
        };
        let size = Exp::new(1.0 / regime.beta).unwrap();
        ll += (regime.theta / r.theta0).ln() + size.ln_pdf(j.xi) - reference.ln_pdf(j.xi);
    }
    let mass = match cp {
        Some(tc) => p.theta * tc + p.after_change.unwrap().theta * (horizon - tc),
        None => p.theta * horizon,
    };
    ll - (mass - r.theta0 * horizon)
}

fn prior_ln_pdf(p: &ParamPrior, x: f64) -> f64 {
    match p.family {
        PriorFamily::InverseGamma => InverseGamma::new(p.a, p.b).unwrap().ln_pdf(x),
        PriorFamily::Gamma => Gamma::new(p.a, p.b).unwrap().ln_pdf(x),
        PriorFamily::Flat => 0.0,
    }
}

/// Log prior with reversion times measured in units of `unit`.
pub fn log_prior(priors: &PriorSpec, params: &ModelParams, unit: f64) -> f64 {
    let lam = |p: &ParamPrior, l: f64| prior_ln_pdf(p, l / unit) - unit.ln();
    let mut lp = prior_ln_pdf(&priors.sigma_y1, params.y1.sigma.powi(2))
        + lam(&priors.lambda_y1, params.y1.lambda)
        + lam(&priors.lambda_j1, params.j1.lambda)
        + lam(&priors.lambda_j2, params.j2.lambda);
    if let Some(y2) = &params.y2 {
        lp += lam(&priors.lambda_y2, y2.lambda);
    }
    for (j, t, b) in [(&params.j1, &priors.theta_1, &priors.beta_1), (&params.j2, &priors.theta_2, &priors.beta_2)] {
        lp += prior_ln_pdf(t, j.theta) + prior_ln_pdf(b, j.beta);
        if let Some(r) = j.after_change {
            lp += prior_ln_pdf(t, r.theta) + prior_ln_pdf(b, r.beta);
        }
    }
    lp
}

pub fn log_normal_density(eps: &[f64]) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    eps.iter().map(|&e| n.ln_pdf(e)).sum()
}

/// A random model, latent state and data set.
pub struct Case {
    pub x: Vec<f64>,
    pub dt: f64,
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub latent: LatentState,
    pub reference: DominatingMeasure,
    pub priors: PriorSpec,
}

pub fn random_jumps<R: Rng>(rng: &mut R, horizon: f64, max: usize) -> MarkedPointProcess {
    let n = rng.random_range(0..=max);
    let mut pts: Vec<Jump> = (0..n)
        .map(|_| Jump { tau: rng.random_range(0.0..horizon), xi: rng.random_range(0.05..20.0) })
        .collect();
    pts.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    pts.dedup_by(|a, b| a.tau == b.tau);
    MarkedPointProcess::new(pts).unwrap()
}

pub fn random_case<R: Rng>(rng: &mut R) -> Case {
    let n = rng.random_range(5..150);
    let dt = [1.0 / 365.0, 1.0 / 52.0, 0.1][rng.random_range(0..3)];
    let horizon = n as f64 * dt;
    let four = rng.random_bool(0.5);
    let mut spec = ModelSpec::new(if four { Variant::FourFactor } else { Variant::ThreeFactor }, horizon);
    if rng.random_bool(0.4) {
        spec = spec.with_change_point(rng.random_range(0.1..0.9) * horizon);
    }
    let jump = |rng: &mut R| {
        let j = JumpComponentParams::new(rng.random_range(0.001..0.5), rng.random_range(1.0..400.0), rng.random_range(0.5..30.0));
        if spec.change_point.is_some() {
            j.with_change(rng.random_range(1.0..400.0), rng.random_range(0.5..30.0))
        } else {
            j
        }
    };
    let params = ModelParams {
        y1: GaussianOUParams::new(rng.random_range(0.005..2.0), rng.random_range(0.5..60.0)).unwrap(),
        y2: four.then(|| GaussianOUParams::new(rng.random_range(0.005..2.0), rng.random_range(0.5..30.0)).unwrap()),
        j1: jump(rng),
        j2: jump(rng),
    };
    let latent = LatentState {
        epsilon: if four { (0..n).map(|_| rng.random_range(-3.0..3.0)).collect() } else { Vec::new() },
        phi1: random_jumps(rng, horizon, 8),
        phi2: random_jumps(rng, horizon, 8),
    };
    let x = (0..=n).map(|_| rng.random_range(-40.0..40.0)).collect();
    let priors = PriorSpec {
        lambda_y1: ParamPrior::inverse_gamma(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)),
        beta_2: ParamPrior::inverse_gamma(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)),
        ..PriorSpec::default()
    };
    Case {
        x,
        dt,
        spec,
        params,
        latent,
        reference: DominatingMeasure {
            theta0: rng.random_range(0.5..100.0),
            beta0: rng.random_range(0.5..10.0),
        },
        priors,
    }
}

/// Relative closeness with an absolute floor of 1.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
