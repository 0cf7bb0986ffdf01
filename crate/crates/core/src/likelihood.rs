//! Augmented-data likelihood, marked Poisson likelihood, priors and
//! conjugate posterior parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dist::{normal_ln_pdf, Gamma, InverseGamma};
use crate::error::{Error, Result};
use crate::model::{
    decay, jump_ou_at_grid, reconstruct_y1, step_variance, GaussianOUParams, JumpComponentParams,
    LatentState, MarkedPointProcess, ModelParams, ModelSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    InverseGamma,
    Gamma,
    Flat,
}

/// Prior family, hyperparameters and optional starting value of one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPrior {
    pub family: PriorFamily,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
}

impl ParamPrior {
    pub const fn inverse_gamma(a: f64, b: f64) -> Self {
        Self {
            family: PriorFamily::InverseGamma,
            a,
            b,
            start: None,
        }
    }

    pub const fn gamma(a: f64, b: f64) -> Self {
        Self {
            family: PriorFamily::Gamma,
            a,
            b,
            start: None,
        }
    }

    pub const fn flat() -> Self {
        Self {
            family: PriorFamily::Flat,
            a: 0.0,
            b: 0.0,
            start: None,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.family {
            PriorFamily::InverseGamma => InverseGamma {
                shape: self.a,
                scale: self.b,
            }
            .ln_pdf(x),
            PriorFamily::Gamma => Gamma {
                shape: self.a,
                rate: self.b,
            }
            .ln_pdf(x),
            PriorFamily::Flat => {
                if x > 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Priors for every parameter. `sigma_y1` is a prior on the variance `σ²_{Y1}`;
/// `theta_*` are shape–rate Gamma priors. The `lambda_*` priors apply to the
/// reversion time measured in the sampler's `rho_time_unit` (one day by
/// default).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    pub sigma_y1: ParamPrior,
    pub sigma_y2: ParamPrior,
    pub lambda_y1: ParamPrior,
    pub lambda_y2: ParamPrior,
    pub lambda_j1: ParamPrior,
    pub lambda_j2: ParamPrior,
    pub theta_1: ParamPrior,
    pub theta_2: ParamPrior,
    pub beta_1: ParamPrior,
    pub beta_2: ParamPrior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            sigma_y1: ParamPrior::inverse_gamma(1.5, 0.005 * 365.0),
            sigma_y2: ParamPrior::flat(),
            lambda_y1: ParamPrior::inverse_gamma(1.0, 1.0),
            lambda_y2: ParamPrior::inverse_gamma(1.0, 1.0),
            lambda_j1: ParamPrior::inverse_gamma(1.0, 1.0),
            lambda_j2: ParamPrior::inverse_gamma(1.0, 1.0),
            theta_1: ParamPrior::gamma(1.0, 10.0 / 365.0),
            theta_2: ParamPrior::gamma(1.0, 10.0 / 365.0),
            beta_1: ParamPrior::inverse_gamma(1.0, 1.0),
            beta_2: ParamPrior::inverse_gamma(1.0, 1.0),
        }
    }
}

impl PriorSpec {
    pub fn entries(&self) -> [(&'static str, &ParamPrior); 10] {
        [
            ("sigma_y1", &self.sigma_y1),
            ("sigma_y2", &self.sigma_y2),
            ("lambda_y1", &self.lambda_y1),
            ("lambda_y2", &self.lambda_y2),
            ("lambda_j1", &self.lambda_j1),
            ("lambda_j2", &self.lambda_j2),
            ("theta_1", &self.theta_1),
            ("theta_2", &self.theta_2),
            ("beta_1", &self.beta_1),
            ("beta_2", &self.beta_2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in self.entries() {
            let expected = match name {
                "sigma_y2" => PriorFamily::Flat,
                "theta_1" | "theta_2" => PriorFamily::Gamma,
                _ => PriorFamily::InverseGamma,
            };
            if p.family != expected {
                return Err(Error::Config(format!(
                    "{name}: prior family must be {expected:?}, got {:?}",
                    p.family
                )));
            }
            if p.family != PriorFamily::Flat && !(p.a > 0.0 && p.b > 0.0) {
                return Err(Error::Config(format!(
                    "{name}: hyperparameters must be > 0, got a={} b={}",
                    p.a, p.b
                )));
            }
            if let Some(s) = p.start {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::Config(format!("{name}: start must be > 0, got {s}")));
                }
            }
        }
        Ok(())
    }

    /// Reads TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Log prior density of `params`, on `σ²_{Y1}`, `σ_{Y2}`, `λ`, `θ`, `β`.
    /// Reversion-time priors apply to `λ/lambda_unit`.
    pub fn log_density(&self, params: &ModelParams, lambda_unit: f64) -> f64 {
        let lam = |p: &ParamPrior, l: f64| p.ln_pdf(l / lambda_unit) - lambda_unit.ln();
        let mut lp = self.sigma_y1.ln_pdf(params.y1.sigma * params.y1.sigma)
            + lam(&self.lambda_y1, params.y1.lambda)
            + lam(&self.lambda_j1, params.j1.lambda)
            + lam(&self.lambda_j2, params.j2.lambda);
        if let Some(y2) = &params.y2 {
            lp += self.sigma_y2.ln_pdf(y2.sigma);
            if !y2.is_brownian() {
                lp += lam(&self.lambda_y2, y2.lambda);
            }
        }
        for (j, tp, bp) in [
            (&params.j1, &self.theta_1, &self.beta_1),
            (&params.j2, &self.theta_2, &self.beta_2),
        ] {
            for r in [Some(j.regime(0)), j.after_change].into_iter().flatten() {
                lp += tp.ln_pdf(r.theta) + bp.ln_pdf(r.beta);
            }
        }
        lp
    }
}

/// Reference marked Poisson law: intensity `theta0`, Exp sizes of mean `beta0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominatingMeasure {
    pub theta0: f64,
    pub beta0: f64,
}

impl Default for DominatingMeasure {
    fn default() -> Self {
        Self {
            theta0: 1.0,
            beta0: 1.0,
        }
    }
}

/// `Σ_{i=1}^{N} (y_i − a·y_{i−1})²`.
pub fn residual_sum_of_squares(y1: &[f64], a: f64) -> f64 {
    y1.windows(2).map(|w| (w[1] - a * w[0]).powi(2)).sum()
}

/// Gaussian log-density of `n` transitions with residual sum `rss` and
/// common transition variance `v`.
pub fn gaussian_ll_from_rss(n: usize, rss: f64, v: f64) -> f64 {
    -0.5 * n as f64 * (2.0 * std::f64::consts::PI * v).ln() - rss / (2.0 * v)
}

/// Log-likelihood of the reconstructed `Y1` path under its OU transition law.
pub fn log_likelihood_gaussian_path(y1: &[f64], params: &GaussianOUParams, dt: f64) -> Result<f64> {
    let v = step_variance(params.lambda, params.sigma, dt);
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("degenerate transition variance {v}")));
    }
    let rss = residual_sum_of_squares(y1, decay(params.lambda, dt));
    Ok(gaussian_ll_from_rss(y1.len().saturating_sub(1), rss, v))
}

/// Log-likelihood of the data given all latent paths.
pub fn log_likelihood_gaussian(
    x: &[f64],
    y2: &[f64],
    j1: &[f64],
    j2: &[f64],
    y1_params: &GaussianOUParams,
    dt: f64,
) -> Result<f64> {
    let y1 = reconstruct_y1(x, y2, j1, j2)?;
    log_likelihood_gaussian_path(&y1, y1_params, dt)
}

/// Log density of a marked Poisson sample on a window of length `window`
/// relative to the reference law.
pub fn log_likelihood_pp_counts(
    n: usize,
    sum_sizes: f64,
    theta: f64,
    beta: f64,
    window: f64,
    reference: DominatingMeasure,
) -> f64 {
    let n = n as f64;
    let mut ll = -(1.0 / beta - 1.0 / reference.beta0) * sum_sizes - (theta - reference.theta0) * window;
    if n > 0.0 {
        ll += n * (theta / reference.theta0).ln() - n * (beta / reference.beta0).ln();
    }
    ll
}

pub fn log_likelihood_marked_pp(
    phi: &MarkedPointProcess,
    theta: f64,
    beta: f64,
    horizon: f64,
    reference: DominatingMeasure,
) -> f64 {
    log_likelihood_pp_counts(phi.len(), phi.sum_sizes(), theta, beta, horizon, reference)
}

/// Jump counts and size sums in the regime before and after the change point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegmentStats {
    pub count: [usize; 2],
    pub sum: [f64; 2],
    pub length: [f64; 2],
}

pub fn segment_stats(phi: &MarkedPointProcess, horizon: f64, change_point: Option<f64>) -> SegmentStats {
    let mut s = SegmentStats::default();
    match change_point {
        Some(tc) => {
            s.length = [tc, horizon - tc];
            for j in phi.points() {
                let k = JumpComponentParams::regime_index(j.tau, change_point);
                s.count[k] += 1;
                s.sum[k] += j.xi;
            }
        }
        None => {
            s.length = [horizon, 0.0];
            s.count[0] = phi.len();
            s.sum[0] = phi.sum_sizes();
        }
    }
    s
}

/// Marked Poisson log-likelihood with one or two `(θ, β)` regimes.
pub fn log_likelihood_jump_component(
    phi: &MarkedPointProcess,
    params: &JumpComponentParams,
    horizon: f64,
    change_point: Option<f64>,
    reference: DominatingMeasure,
) -> f64 {
    let s = segment_stats(phi, horizon, change_point);
    let segments = if change_point.is_some() { 2 } else { 1 };
    (0..segments)
        .map(|k| {
            let r = params.regime(k);
            log_likelihood_pp_counts(s.count[k], s.sum[k], r.theta, r.beta, s.length[k], reference)
        })
        .sum()
}

/// `ρ = e^{−u/λ}` for time unit `u`.
pub fn rho_from_lambda(lambda: f64, unit: f64) -> f64 {
    (-unit / lambda).exp()
}

pub fn lambda_from_rho(rho: f64, unit: f64) -> f64 {
    -unit / rho.ln()
}

/// Log density of `ρ = e^{−u/λ}` when `λ/u ~ IG(a, b)`:
/// `f(ρ) = b^a/Γ(a) · (−ln ρ)^{a−1} · ρ^{b − 1}`. The time unit `u` drops out.
pub fn log_prior_rho(rho: f64, a: f64, b: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(a * b.ln() - ln_gamma(a) + (a - 1.0) * (-rho.ln()).ln() + (b - 1.0) * rho.ln())
}

/// Conditional law of `σ²_{Y1}` given the `Y1` path.
pub fn posterior_sigma_y1(prior: (f64, f64), y1: &[f64], lambda: f64, dt: f64) -> Result<InverseGamma> {
    if y1.len() < 2 {
        return Err(Error::domain("need at least two path values"));
    }
    let rss = residual_sum_of_squares(y1, decay(lambda, dt));
    posterior_sigma_y1_from_rss(prior, y1.len() - 1, rss, lambda, dt)
}

pub fn posterior_sigma_y1_from_rss(
    prior: (f64, f64),
    n: usize,
    rss: f64,
    lambda: f64,
    dt: f64,
) -> Result<InverseGamma> {
    // v = σ²·λ(1 − e^{−2Δ/λ})/2, so rss/(2v) = rss/(σ²·λ(1 − e^{−2Δ/λ}))
    let k = -lambda * (-2.0 * dt / lambda).exp_m1();
    InverseGamma::new(prior.0 + n as f64 / 2.0, prior.1 + rss / k)
}

/// Conditional law of `θ` given `n_jumps` jumps on a window (shape–rate prior).
pub fn posterior_theta(prior: (f64, f64), n_jumps: usize, window: f64) -> Result<Gamma> {
    if !(window > 0.0) {
        return Err(Error::domain("window length must be positive"));
    }
    Gamma::new(prior.0 + n_jumps as f64, prior.1 + window)
}

/// Conditional law of the mean jump size `β`.
pub fn posterior_beta(prior: (f64, f64), n_jumps: usize, sum_sizes: f64) -> Result<InverseGamma> {
    if !(sum_sizes >= 0.0) {
        return Err(Error::domain("sum of sizes must be >= 0"));
    }
    InverseGamma::new(prior.0 + n_jumps as f64, prior.1 + sum_sizes)
}

/// Log density of the standard normal increments driving `Y2`.
pub fn log_density_epsilon(eps: &[f64]) -> f64 {
    eps.iter().map(|&e| normal_ln_pdf(e)).sum()
}

/// Unnormalised log posterior of parameters and latent state: Gaussian
/// likelihood, the two marked Poisson likelihoods, the `𝓔` density and
/// the parameter priors.
#[allow(clippy::too_many_arguments)]
pub fn log_joint(
    x: &[f64],
    latent: &LatentState,
    params: &ModelParams,
    spec: &ModelSpec,
    priors: &PriorSpec,
    dt: f64,
    lambda_unit: f64,
    reference: DominatingMeasure,
) -> Result<f64> {
    let n = x.len() - 1;
    let y2 = match &params.y2 {
        Some(p) => crate::model::gaussian_ou_from_normals(p, &latent.epsilon, dt),
        None => vec![0.0; n + 1],
    };
    let j1 = jump_ou_at_grid(params.j1.lambda, &latent.phi1, n, dt);
    let j2 = jump_ou_at_grid(params.j2.lambda, &latent.phi2, n, dt);
    let ll = log_likelihood_gaussian(x, &y2, &j1, &j2, &params.y1, dt)?;
    let cp = spec.change_point;
    Ok(ll
        + log_likelihood_jump_component(&latent.phi1, &params.j1, spec.horizon, cp, reference)
        + log_likelihood_jump_component(&latent.phi2, &params.j2, spec.horizon, cp, reference)
        + log_density_epsilon(&latent.epsilon)
        + priors.log_density(params, lambda_unit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Jump;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_single_term() {
        let p = GaussianOUParams::new(1.0, 1.0).unwrap();
        let ll = log_likelihood_gaussian_path(&[0.0, 0.0], &p, 1.0).unwrap();
        let v = (1.0 - (-2.0f64).exp()) / 2.0;
        assert_abs_diff_eq!(ll, -0.5 * (2.0 * std::f64::consts::PI * v).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(ll, -0.49966, epsilon = 1e-5);
    }

    #[test]
    fn gaussian_scale_identity() {
        let p = GaussianOUParams::new(0.3, 1.7).unwrap();
        let q = GaussianOUParams::new(0.3, 3.4).unwrap();
        let y = [0.0; 11];
        let a = log_likelihood_gaussian_path(&y, &p, 0.01).unwrap();
        let b = log_likelihood_gaussian_path(&y, &q, 0.01).unwrap();
        assert_abs_diff_eq!(b - a, -10.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_variance_is_error() {
        let p = GaussianOUParams {
            lambda: 1e-300,
            sigma: 1e-200,
        };
        assert!(log_likelihood_gaussian_path(&[0.0, 1.0], &p, 1.0).is_err());
    }

    #[test]
    fn marked_pp_examples() {
        let unit = DominatingMeasure::default();
        let empty = MarkedPointProcess::empty();
        assert_abs_diff_eq!(log_likelihood_marked_pp(&empty, 2.0, 3.0, 1.0, unit), -1.0, epsilon = 1e-15);
        let one = MarkedPointProcess::new(vec![Jump { tau: 0.3, xi: 2.0 }]).unwrap();
        assert_abs_diff_eq!(
            log_likelihood_marked_pp(&one, 4.0, 0.5, 1.0, unit),
            8f64.ln() - 5.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            log_likelihood_marked_pp(&one, 4.0, 0.5, 1.0, unit),
            -2.92056,
            epsilon = 1e-5
        );
        let many = MarkedPointProcess::new(
            (0..7).map(|i| Jump { tau: 0.1 * i as f64, xi: 1.0 + i as f64 }).collect(),
        )
        .unwrap();
        assert_eq!(log_likelihood_marked_pp(&many, 1.0, 1.0, 2.0, unit), 0.0);
        let r = DominatingMeasure { theta0: 3.0, beta0: 2.5 };
        assert_eq!(log_likelihood_marked_pp(&many, 3.0, 2.5, 2.0, r), 0.0);
    }

    #[test]
    fn change_point_likelihood_splits() {
        let phi = MarkedPointProcess::new(vec![
            Jump { tau: 0.2, xi: 1.0 },
            Jump { tau: 1.0, xi: 2.0 },
            Jump { tau: 1.5, xi: 3.0 },
        ])
        .unwrap();
        let p = JumpComponentParams::new(0.01, 5.0, 2.0).with_change(9.0, 4.0);
        let unit = DominatingMeasure::default();
        let s = segment_stats(&phi, 2.0, Some(1.0));
        assert_eq!(s.count, [2, 1]);
        let got = log_likelihood_jump_component(&phi, &p, 2.0, Some(1.0), unit);
        let want = log_likelihood_pp_counts(2, 3.0, 5.0, 2.0, 1.0, unit)
            + log_likelihood_pp_counts(1, 3.0, 9.0, 4.0, 1.0, unit);
        assert_abs_diff_eq!(got, want, epsilon = 1e-14);
    }

    #[test]
    fn rho_prior_unit_case_is_uniform() {
        for rho in [1e-9, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
            assert_abs_diff_eq!(log_prior_rho(rho, 1.0, 1.0).unwrap(), 0.0, epsilon = 1e-12);
        }
        assert!(log_prior_rho(0.0, 1.0, 1.0).is_err());
        assert!(log_prior_rho(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rho_prior_vanishes_at_boundaries() {
        for rho in [1e-12, 1.0 - 1e-12] {
            assert!(log_prior_rho(rho, 2.0, 2.0).unwrap() < -20.0);
        }
    }

    #[test]
    fn rho_lambda_round_trip() {
        for i in 1..1000 {
            let rho = i as f64 / 1000.0;
            let back = rho_from_lambda(lambda_from_rho(rho, 1.0), 1.0);
            assert!((back - rho).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma_posterior_example() {
        let e = (-1.0f64).exp();
        let ig = posterior_sigma_y1((1.5, 1.825), &[0.0, 1.0, 1.0 + e], 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(ig.shape, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ig.scale, 1.825 + 2.0 / (1.0 - (-2.0f64).exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(ig.scale, 4.13804, epsilon = 1e-5);
        let flat = posterior_sigma_y1((1.5, 1.825), &[0.0; 5], 1.0, 1.0).unwrap();
        assert_eq!((flat.shape, flat.scale), (3.5, 1.825));
    }

    #[test]
    fn theta_and_beta_posteriors() {
        let g = posterior_theta((1.0, 10.0 / 365.0), 73, 2.0).unwrap();
        assert_eq!(g.shape, 74.0);
        assert_abs_diff_eq!(g.rate, 2.0 + 10.0 / 365.0, epsilon = 1e-15);
        let g0 = posterior_theta((2.0, 3.0), 0, 1.5).unwrap();
        assert_eq!((g0.shape, g0.rate), (2.0, 4.5));
        let ig = posterior_beta((1.0, 1.0), 4, 20.0).unwrap();
        assert_eq!((ig.shape, ig.scale), (5.0, 21.0));
        assert_eq!(posterior_beta((1.0, 1.0), 0, 0.0).unwrap(), InverseGamma::new(1.0, 1.0).unwrap());
        let big = posterior_theta((1.0, 10.0 / 365.0), 100_000, 1000.0).unwrap();
        assert!((big.mean() - 100.0).abs() < 0.01);
    }

    #[test]
    fn prior_spec_round_trips_and_validates() {
        let p = PriorSpec::default();
        p.validate().unwrap();
        let toml_text = toml::to_string(&p).unwrap();
        assert_eq!(toml::from_str::<PriorSpec>(&toml_text).unwrap(), p);
        let partial: PriorSpec =
            toml::from_str("[beta_1]\nfamily = \"inverse_gamma\"\na = 2.0\nb = 3.0\n").unwrap();
        assert_eq!(partial.beta_1.a, 2.0);
        assert_eq!(partial.theta_1, p.theta_1);
        let mut bad = p;
        bad.theta_1.family = PriorFamily::InverseGamma;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let mut bad = p;
        bad.beta_2.b = 0.0;
        assert!(bad.validate().is_err());
    }
}
