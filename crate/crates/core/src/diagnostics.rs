//! Goodness-of-fit checks, autocorrelation, quantile fans and chain summaries.

use serde::{Deserialize, Serialize};

use crate::dist::normal_cdf;
use crate::error::{Error, Result};
use crate::model::{
    decay, gaussian_ou_from_normals, jump_ou_at_grid, reconstruct_y1, step_variance,
    GaussianOUParams, JumpComponentParams, MarkedPointProcess, ModelSpec,
};
use crate::mcmc::output::ChainOutput;
use crate::mcmc::state::ChainState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > x)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        let c = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut cdf = 0.0;
        for k in 1..=50 {
            let m = (2 * k - 1) as f64;
            let term = (c * m * m).exp();
            cdf += term;
            if term < 1e-17 {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sf += if k % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// Exact one-sample KS distance of a sample from a continuous law.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::domain("KS test on an empty sample"));
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("KS test on a sample containing NaN"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// KS test with the asymptotic p-value at `√n·D`.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let d = ks_statistic(sample, cdf)?;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf((sample.len() as f64).sqrt() * d),
    })
}

/// Standardised OU innovations of a `Y1` path.
pub fn y1_residuals(y1: &[f64], params: &GaussianOUParams, dt: f64) -> Vec<f64> {
    let a = decay(params.lambda, dt);
    let sd = step_variance(params.lambda, params.sigma, dt).sqrt();
    y1.windows(2).map(|w| (w[1] - a * w[0]) / sd).collect()
}

pub const PVALUE_NAMES: [&str; 6] = ["p_y1", "p_y2", "p_xi1", "p_theta1", "p_xi2", "p_theta2"];

/// Per-iteration KS p-values; `None` marks an undefined test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PValueSet {
    pub p_y1: Option<f64>,
    pub p_y2: Option<f64>,
    pub p_xi1: Option<f64>,
    pub p_theta1: Option<f64>,
    pub p_xi2: Option<f64>,
    pub p_theta2: Option<f64>,
}

impl PValueSet {
    pub fn values(&self) -> [Option<f64>; 6] {
        [self.p_y1, self.p_y2, self.p_xi1, self.p_theta1, self.p_xi2, self.p_theta2]
    }

    pub fn from_values(v: [Option<f64>; 6]) -> Self {
        Self {
            p_y1: v[0],
            p_y2: v[1],
            p_xi1: v[2],
            p_theta1: v[3],
            p_xi2: v[4],
            p_theta2: v[5],
        }
    }
}

/// Averages over retained iterations.
pub type PosteriorPValues = PValueSet;

fn uniform_cdf(u: f64) -> f64 {
    u.clamp(0.0, 1.0)
}

/// KS p-value of jump sizes against `Exp(mean β)` of their regime.
pub fn jump_size_pvalue(
    phi: &MarkedPointProcess,
    params: &JumpComponentParams,
    change_point: Option<f64>,
) -> Option<f64> {
    if phi.is_empty() {
        return None;
    }
    let u: Vec<f64> = phi
        .points()
        .iter()
        .map(|j| -(-j.xi / params.regime_at(j.tau, change_point).beta).exp_m1())
        .collect();
    ks_test(&u, uniform_cdf).ok().map(|r| r.p_value)
}

/// Integrated intensity `∫_0^t θ(s) ds`.
fn compensator(params: &JumpComponentParams, change_point: Option<f64>, t: f64) -> f64 {
    match change_point {
        Some(tc) if t > tc => params.regime(0).theta * tc + params.regime(1).theta * (t - tc),
        _ => params.regime(0).theta * t,
    }
}

/// KS p-value of inter-arrival times against `Exp(rate θ)`. Gaps are
/// measured on the compensator scale, which reduces to `θ·Δτ` with a single
/// regime. Without `from_zero` the first gap starts at `τ_1`.
pub fn inter_arrival_pvalue(
    phi: &MarkedPointProcess,
    params: &JumpComponentParams,
    change_point: Option<f64>,
    from_zero: bool,
) -> Option<f64> {
    let mut last = if from_zero { Some(0.0) } else { None };
    let mut u = Vec::with_capacity(phi.len());
    for j in phi.points() {
        let c = compensator(params, change_point, j.tau);
        if let Some(prev) = last {
            u.push(-(prev - c).exp_m1());
        }
        last = Some(c);
    }
    if u.is_empty() {
        return None;
    }
    ks_test(&u, uniform_cdf).ok().map(|r| r.p_value)
}

/// All six p-values from already reconstructed latent paths.
pub fn pvalues_from_paths(
    y1: &[f64],
    state: &ChainState,
    spec: &ModelSpec,
    dt: f64,
    first_gap_from_zero: bool,
) -> PValueSet {
    let p = &state.params;
    let l = &state.latent;
    let cp = spec.change_point;
    let res = y1_residuals(y1, &p.y1, dt);
    PValueSet {
        p_y1: ks_test(&res, normal_cdf).ok().map(|r| r.p_value),
        p_y2: if spec.variant.has_y2() {
            ks_test(&l.epsilon, normal_cdf).ok().map(|r| r.p_value)
        } else {
            None
        },
        p_xi1: jump_size_pvalue(&l.phi1, &p.j1, cp),
        p_theta1: inter_arrival_pvalue(&l.phi1, &p.j1, cp, first_gap_from_zero),
        p_xi2: jump_size_pvalue(&l.phi2, &p.j2, cp),
        p_theta2: inter_arrival_pvalue(&l.phi2, &p.j2, cp, first_gap_from_zero),
    }
}

/// Per-iteration p-values, reconstructing the paths from the state.
pub fn iteration_pvalues(
    state: &ChainState,
    data: &[f64],
    spec: &ModelSpec,
    dt: f64,
    first_gap_from_zero: bool,
) -> Result<PValueSet> {
    let n = data.len().saturating_sub(1);
    let y2 = match &state.params.y2 {
        Some(q) => gaussian_ou_from_normals(q, &state.latent.epsilon, dt),
        None => vec![0.0; n + 1],
    };
    let j1 = jump_ou_at_grid(state.params.j1.lambda, &state.latent.phi1, n, dt);
    let j2 = jump_ou_at_grid(state.params.j2.lambda, &state.latent.phi2, n, dt);
    let y1 = reconstruct_y1(data, &y2, &j1, &j2)?;
    Ok(pvalues_from_paths(&y1, state, spec, dt, first_gap_from_zero))
}

/// Mean of each p-value over the iterations where it is defined.
pub fn posterior_predictive_pvalues(records: &[PValueSet]) -> Result<PosteriorPValues> {
    if records.is_empty() {
        return Err(Error::domain("no retained records"));
    }
    let mut out = [None; 6];
    for (k, slot) in out.iter_mut().enumerate() {
        let (sum, count) = records
            .iter()
            .filter_map(|r| r.values()[k])
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count > 0 {
            *slot = Some(sum / count as f64);
        }
    }
    Ok(PValueSet::from_values(out))
}

/// Sample autocorrelations for lags `0..=max_lag`, normalised by the
/// lag-0 autocovariance.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::domain(format!("max_lag {max_lag} must be below the length {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Err(Error::domain("autocorrelation of a constant series"));
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect())
}

/// Inclusive linear-interpolation quantile of sorted data: position
/// `(n−1)·p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = h - lo as f64;
    if w == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    }
}

/// Per-time quantile bands; `bands[l][t]` is level `levels[l]` at time `t`.
pub fn quantile_fan(paths: &[Vec<f64>], levels: &[f64]) -> Result<Vec<Vec<f64>>> {
    if paths.len() < 2 {
        return Err(Error::domain("quantile fan needs at least two paths"));
    }
    let len = paths[0].len();
    if paths.iter().any(|p| p.len() != len) {
        return Err(Error::domain("paths differ in length"));
    }
    if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::domain("quantile levels must lie in [0, 1]"));
    }
    let mut bands = vec![Vec::with_capacity(len); levels.len()];
    let mut col = vec![0.0; paths.len()];
    for t in 0..len {
        for (c, p) in col.iter_mut().zip(paths) {
            *c = p[t];
        }
        col.sort_by(f64::total_cmp);
        for (band, &l) in bands.iter_mut().zip(levels) {
            band.push(quantile_sorted(&col, l));
        }
    }
    Ok(bands)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

/// Sample mean and sample SD (`n − 1`) of each column.
pub fn summarize_columns(names: &[String], rows: &[Vec<f64>]) -> Result<Vec<ParamSummary>> {
    if rows.len() < 2 {
        return Err(Error::domain("summaries need at least two records"));
    }
    let n = rows.len() as f64;
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let shift = rows[0][k];
            let mean = shift + rows.iter().map(|r| r[k] - shift).sum::<f64>() / n;
            let ss: f64 = rows.iter().map(|r| (r[k] - mean).powi(2)).sum();
            ParamSummary {
                name: name.clone(),
                mean,
                sd: (ss / (n - 1.0)).sqrt(),
            }
        })
        .collect())
}

/// Posterior mean and SD of every scalar parameter of a chain.
pub fn summarize_chain(chain: &ChainOutput) -> Result<Vec<ParamSummary>> {
    summarize_columns(&chain.param_names, &chain.param_rows())
}
