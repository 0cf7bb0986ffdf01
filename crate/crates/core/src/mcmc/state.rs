use serde::{Deserialize, Serialize};

use crate::likelihood::PriorSpec;
use crate::model::{
    standard_normals, GaussianOUParams, JumpComponentParams, LatentState, ModelParams, ModelSpec,
    Variant,
};
use crate::rng;

/// Parameters, latent paths and the cached data log-likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub params: ModelParams,
    pub latent: LatentState,
    pub log_likelihood: f64,
}

/// Starting values. Entries in `priors.*.start` override the defaults;
/// `sigma_y1.start` is the volatility, not the variance.
pub fn initial_params(spec: &ModelSpec, priors: &PriorSpec) -> ModelParams {
    let d = 1.0 / 365.0;
    let four = spec.variant.has_y2();
    let pick = |start: Option<f64>, default: f64| start.unwrap_or(default);
    let y1 = GaussianOUParams {
        lambda: pick(priors.lambda_y1.start, if four { 0.001 } else { 5.0 * d }),
        sigma: pick(
            priors.sigma_y1.start,
            if four { 0.1 } else { 0.2 } * 365f64.sqrt(),
        ),
    };
    let y2 = match spec.variant {
        Variant::ThreeFactor => None,
        Variant::FourFactor => Some(GaussianOUParams {
            lambda: pick(priors.lambda_y2.start, 1.0),
            sigma: pick(priors.sigma_y2.start, 10.0),
        }),
        Variant::BbPlus3ou => Some(GaussianOUParams::brownian(pick(priors.sigma_y2.start, 10.0))),
    };
    let jump = |lam: Option<f64>, th: Option<f64>, be: Option<f64>, lam_default: f64| {
        let theta = pick(th, 0.001 * 365.0);
        let beta = pick(be, 0.5);
        let j = JumpComponentParams::new(pick(lam, lam_default), theta, beta);
        if spec.change_point.is_some() {
            j.with_change(theta, beta)
        } else {
            j
        }
    };
    ModelParams {
        y1,
        y2,
        j1: jump(
            priors.lambda_j1.start,
            priors.theta_1.start,
            priors.beta_1.start,
            if four { d } else { 5.0 * d },
        ),
        j2: jump(priors.lambda_j2.start, priors.theta_2.start, priors.beta_2.start, d),
    }
}

/// Initial latent state: standard normal increments for `Y2` and empty
/// jump sets.
pub fn initial_latent(spec: &ModelSpec, n_increments: usize, seed: u64) -> LatentState {
    let epsilon = if spec.variant.has_y2() {
        standard_normals(&mut rng::stream(seed, rng::STREAM_Y2), n_increments)
    } else {
        Vec::new()
    };
    LatentState {
        epsilon,
        ..Default::default()
    }
}

/// Names of the scalar parameters written per chain record.
pub fn param_names(spec: &ModelSpec) -> Vec<&'static str> {
    let mut names = vec!["sigma_y1", "lambda_y1"];
    match spec.variant {
        Variant::ThreeFactor => {}
        Variant::FourFactor => names.extend(["sigma_y2", "lambda_y2"]),
        Variant::BbPlus3ou => names.push("sigma_y2"),
    }
    names.extend(["lambda_j1", "lambda_j2", "theta_1", "theta_2", "beta_1", "beta_2"]);
    if spec.change_point.is_some() {
        names.extend(["theta_1_after", "theta_2_after", "beta_1_after", "beta_2_after"]);
    }
    names
}

pub fn param_values(params: &ModelParams, spec: &ModelSpec) -> Vec<f64> {
    let mut v = vec![params.y1.sigma, params.y1.lambda];
    if let Some(y2) = &params.y2 {
        v.push(y2.sigma);
        if !y2.is_brownian() {
            v.push(y2.lambda);
        }
    }
    v.extend([
        params.j1.lambda,
        params.j2.lambda,
        params.j1.theta,
        params.j2.theta,
        params.j1.beta,
        params.j2.beta,
    ]);
    if spec.change_point.is_some() {
        let a = params.j1.regime(1);
        let b = params.j2.regime(1);
        v.extend([a.theta, b.theta, a.beta, b.beta]);
    }
    v
}

/// Inverse of [`param_values`].
pub fn params_from_values(values: &[f64], spec: &ModelSpec) -> ModelParams {
    let mut it = values.iter().copied();
    let mut next = || it.next().expect("value count matches param_names");
    let y1 = GaussianOUParams {
        sigma: next(),
        lambda: next(),
    };
    let y2 = match spec.variant {
        Variant::ThreeFactor => None,
        Variant::FourFactor => Some(GaussianOUParams {
            sigma: next(),
            lambda: next(),
        }),
        Variant::BbPlus3ou => Some(GaussianOUParams::brownian(next())),
    };
    let (l1, l2, t1, t2, b1, b2) = (next(), next(), next(), next(), next(), next());
    let mut j1 = JumpComponentParams::new(l1, t1, b1);
    let mut j2 = JumpComponentParams::new(l2, t2, b2);
    if spec.change_point.is_some() {
        let (t1a, t2a, b1a, b2a) = (next(), next(), next(), next());
        j1 = j1.with_change(t1a, b1a);
        j2 = j2.with_change(t2a, b2a);
    }
    ModelParams { y1, y2, j1, j2 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    SigmaY2,
    RhoY1,
    RhoY2,
    RhoJ1,
    RhoJ2,
    EpsilonReplace,
    EpsilonPermute,
    Birth1,
    Death1,
    Displace1,
    Multiply1,
    Birth2,
    Death2,
    Displace2,
    Multiply2,
}

pub const MOVE_NAMES: [&str; 15] = [
    "sigma_y2",
    "rho_y1",
    "rho_y2",
    "rho_j1",
    "rho_j2",
    "epsilon_replace",
    "epsilon_permute",
    "birth_1",
    "death_1",
    "displace_1",
    "multiply_1",
    "birth_2",
    "death_2",
    "displace_2",
    "multiply_2",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCount {
    pub accepted: u64,
    pub proposed: u64,
}

impl MoveCount {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// Cumulative accepted/proposed counts per Metropolis–Hastings move type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters(pub [MoveCount; 15]);

impl Counters {
    pub fn record(&mut self, mv: Move, accepted: bool) {
        let c = &mut self.0[mv as usize];
        c.proposed += 1;
        c.accepted += accepted as u64;
    }

    pub fn get(&self, mv: Move) -> MoveCount {
        self.0[mv as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, MoveCount)> + '_ {
        MOVE_NAMES.iter().copied().zip(self.0.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_values_follow_table() {
        let spec = ModelSpec::new(Variant::ThreeFactor, 2.0);
        let p = initial_params(&spec, &PriorSpec::default());
        assert_eq!(p.y1.sigma, 0.2 * 365f64.sqrt());
        assert_eq!(p.y1.lambda, 5.0 / 365.0);
        assert_eq!(p.j1.theta, 0.365);
        assert_eq!(p.j2.lambda, 1.0 / 365.0);
        p.validate(&spec).unwrap();
        let spec4 = ModelSpec::new(Variant::FourFactor, 2.0).with_change_point(1.0);
        let p4 = initial_params(&spec4, &PriorSpec::default());
        assert_eq!(p4.y2.unwrap().sigma, 10.0);
        assert_eq!(p4.y1.lambda, 0.001);
        p4.validate(&spec4).unwrap();
        let mut priors = PriorSpec::default();
        priors.beta_1.start = Some(3.0);
        assert_eq!(initial_params(&spec, &priors).j1.beta, 3.0);
    }

    #[test]
    fn value_round_trip() {
        for spec in [
            ModelSpec::new(Variant::ThreeFactor, 2.0),
            ModelSpec::new(Variant::FourFactor, 2.0).with_change_point(0.5),
            ModelSpec::new(Variant::BbPlus3ou, 2.0),
        ] {
            let p = initial_params(&spec, &PriorSpec::default());
            let v = param_values(&p, &spec);
            assert_eq!(v.len(), param_names(&spec).len());
            assert_eq!(params_from_values(&v, &spec), p);
        }
    }

    #[test]
    fn counters() {
        let mut c = Counters::default();
        c.record(Move::Birth1, true);
        c.record(Move::Birth1, false);
        assert_eq!(c.get(Move::Birth1).rate(), Some(0.5));
        assert_eq!(c.get(Move::Death2).rate(), None);
        assert_eq!(c.iter().count(), 15);
    }
}
