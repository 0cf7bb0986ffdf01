//! Model variants, parameters, exact transition laws and simulation.
//!
//! The deseasonalised price is `X = Y1 + Y2 + J1 − J2`, where `Y1`, `Y2`
//! are Gaussian OU processes (or `Y2` is a driftless Brownian motion) and
//! `J1`, `J2` are OU processes driven by compound Poisson jumps with
//! exponential sizes. All parameters are in years and EUR/MWh.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::seasonality::{evaluate_f, SeasonalCoefficients};
use crate::series::PriceSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "3ou")]
    ThreeFactor,
    #[serde(rename = "4ou")]
    FourFactor,
    #[serde(rename = "bb3ou")]
    BbPlus3ou,
}

impl Variant {
    pub fn has_y2(self) -> bool {
        self != Variant::ThreeFactor
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::ThreeFactor => "3ou",
            Variant::FourFactor => "4ou",
            Variant::BbPlus3ou => "bb3ou",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3ou" => Ok(Variant::ThreeFactor),
            "4ou" => Ok(Variant::FourFactor),
            "bb3ou" => Ok(Variant::BbPlus3ou),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

mod lambda_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("infinite")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "infinite" || t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"infinite\", got {t:?}"
            ))),
        }
    }
}

/// Gaussian OU component `dY = −Y/λ dt + σ dW`; `λ = ∞` is Brownian motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianOUParams {
    #[serde(with = "lambda_repr")]
    pub lambda: f64,
    pub sigma: f64,
}

impl GaussianOUParams {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        let p = Self { lambda, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn brownian(sigma: f64) -> Self {
        Self {
            lambda: f64::INFINITY,
            sigma,
        }
    }

    pub fn is_brownian(&self) -> bool {
        self.lambda.is_infinite()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || self.lambda.is_nan() {
            return Err(Error::domain(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn decay(&self, s: f64) -> f64 {
        decay(self.lambda, s)
    }

    /// Conditional variance after elapsed time `s`.
    pub fn step_variance(&self, s: f64) -> f64 {
        step_variance(self.lambda, self.sigma, s)
    }
}

/// `e^{−s/λ}`, equal to 1 for infinite `λ`.
pub fn decay(lambda: f64, s: f64) -> f64 {
    if lambda.is_infinite() {
        1.0
    } else {
        (-s / lambda).exp()
    }
}

/// `λσ²(1 − e^{−2s/λ})/2`, or `σ²s` for infinite `λ`.
pub fn step_variance(lambda: f64, sigma: f64, s: f64) -> f64 {
    if lambda.is_infinite() {
        sigma * sigma * s
    } else {
        -lambda * sigma * sigma * (-2.0 * s / lambda).exp_m1() / 2.0
    }
}

/// Exact conditional mean and variance of `Y(t+s)` given `Y(t) = y`.
pub fn ou_transition_moments(params: &GaussianOUParams, y: f64, s: f64) -> Result<(f64, f64)> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("elapsed time must be >= 0, got {s}")));
    }
    Ok((y * params.decay(s), params.step_variance(s)))
}

/// Jump OU component with one or two `(θ, β)` regimes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpComponentParams {
    pub lambda: f64,
    pub theta: f64,
    pub beta: f64,
    /// Intensity and mean size after the change point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_change: Option<JumpRegime>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRegime {
    pub theta: f64,
    pub beta: f64,
}

impl JumpComponentParams {
    pub fn new(lambda: f64, theta: f64, beta: f64) -> Self {
        Self {
            lambda,
            theta,
            beta,
            after_change: None,
        }
    }

    pub fn with_change(mut self, theta: f64, beta: f64) -> Self {
        self.after_change = Some(JumpRegime { theta, beta });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut vals = vec![self.lambda, self.theta, self.beta];
        if let Some(r) = self.after_change {
            vals.extend([r.theta, r.beta]);
        }
        if vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain("jump parameters must be positive and finite"));
        }
        Ok(())
    }

    /// Regime index (0 or 1) of a jump at `tau`; jumps at the change point
    /// belong to the first regime.
    pub fn regime_index(tau: f64, change_point: Option<f64>) -> usize {
        match change_point {
            Some(tc) if tau > tc => 1,
            _ => 0,
        }
    }

    pub fn regime(&self, index: usize) -> JumpRegime {
        match (index, self.after_change) {
            (1, Some(r)) => r,
            _ => JumpRegime {
                theta: self.theta,
                beta: self.beta,
            },
        }
    }

    pub fn regime_at(&self, tau: f64, change_point: Option<f64>) -> JumpRegime {
        self.regime(Self::regime_index(tau, change_point))
    }

    /// `∫_0^T θ(s) ds`.
    pub fn integrated_intensity(&self, horizon: f64, change_point: Option<f64>) -> f64 {
        match (change_point, self.after_change) {
            (Some(tc), Some(r)) => self.theta * tc + r.theta * (horizon - tc),
            _ => self.theta * horizon,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_point: Option<f64>,
    pub horizon: f64,
}

impl ModelSpec {
    pub fn new(variant: Variant, horizon: f64) -> Self {
        Self {
            variant,
            change_point: None,
            horizon,
        }
    }

    pub fn with_change_point(mut self, tc: f64) -> Self {
        self.change_point = Some(tc);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain("horizon must be positive"));
        }
        if let Some(tc) = self.change_point {
            if !(tc > 0.0 && tc < self.horizon) {
                return Err(Error::domain(format!(
                    "change point {tc} must lie strictly inside (0, {})",
                    self.horizon
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub tau: f64,
    pub xi: f64,
}

/// Jump times and sizes, sorted by strictly increasing time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Jump>", into = "Vec<Jump>")]
pub struct MarkedPointProcess {
    points: Vec<Jump>,
}

impl TryFrom<Vec<Jump>> for MarkedPointProcess {
    type Error = Error;
    fn try_from(points: Vec<Jump>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<MarkedPointProcess> for Vec<Jump> {
    fn from(p: MarkedPointProcess) -> Self {
        p.points
    }
}

impl MarkedPointProcess {
    pub fn new(points: Vec<Jump>) -> Result<Self> {
        if points.iter().any(|j| !(j.tau >= 0.0 && j.tau.is_finite())) {
            return Err(Error::domain("jump times must be finite and >= 0"));
        }
        if points.iter().any(|j| !(j.xi > 0.0 && j.xi.is_finite())) {
            return Err(Error::domain("jump sizes must be positive and finite"));
        }
        if points.windows(2).any(|w| w[1].tau <= w[0].tau) {
            return Err(Error::domain("jump times must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[Jump] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sum_sizes(&self) -> f64 {
        self.points.iter().map(|j| j.xi).sum()
    }

    pub fn within(&self, horizon: f64) -> bool {
        self.points.last().is_none_or(|j| j.tau <= horizon)
    }

    /// Position at which a jump at `tau` would be inserted, or `None` if a
    /// jump already sits at exactly that time.
    pub fn insertion_index(&self, tau: f64) -> Option<usize> {
        let k = self.points.partition_point(|j| j.tau < tau);
        match self.points.get(k) {
            Some(j) if j.tau == tau => None,
            _ => Some(k),
        }
    }

    pub fn insert(&mut self, jump: Jump) -> Result<usize> {
        let k = self
            .insertion_index(jump.tau)
            .ok_or_else(|| Error::domain("duplicate jump time"))?;
        self.points.insert(k, jump);
        Ok(k)
    }

    pub fn remove(&mut self, index: usize) -> Jump {
        self.points.remove(index)
    }

    /// Replaces a jump; the caller must keep times strictly between the
    /// neighbours.
    pub fn set(&mut self, index: usize, jump: Jump) {
        debug_assert!(index == 0 || self.points[index - 1].tau < jump.tau);
        debug_assert!(index + 1 >= self.points.len() || jump.tau < self.points[index + 1].tau);
        self.points[index] = jump;
    }

    /// Number of jumps with `tau <= t`.
    pub fn count_upto(&self, t: f64) -> usize {
        self.points.partition_point(|j| j.tau <= t)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub epsilon: Vec<f64>,
    pub phi1: MarkedPointProcess,
    pub phi2: MarkedPointProcess,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub y1: GaussianOUParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y2: Option<GaussianOUParams>,
    pub j1: JumpComponentParams,
    pub j2: JumpComponentParams,
}

impl ModelParams {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        spec.validate()?;
        self.y1.validate()?;
        if self.y1.is_brownian() {
            return Err(Error::domain("Y1 must be mean reverting"));
        }
        match (spec.variant, &self.y2) {
            (Variant::ThreeFactor, None) => {}
            (Variant::ThreeFactor, Some(_)) => {
                return Err(Error::domain("three-factor model has no Y2 component"))
            }
            (_, None) => return Err(Error::domain(format!("variant {} needs Y2", spec.variant))),
            (v, Some(y2)) => {
                y2.validate()?;
                if (v == Variant::BbPlus3ou) != y2.is_brownian() {
                    return Err(Error::domain(
                        "Y2 lambda must be infinite exactly for the bb3ou variant",
                    ));
                }
            }
        }
        self.j1.validate()?;
        self.j2.validate()?;
        let cp = spec.change_point.is_some();
        if cp != self.j1.after_change.is_some() || cp != self.j2.after_change.is_some() {
            return Err(Error::domain(
                "per-regime jump parameters required exactly in change-point mode",
            ));
        }
        Ok(())
    }
}

/// Smallest grid index `i` with `i·dt >= tau`.
pub fn grid_cell(tau: f64, dt: f64) -> usize {
    let mut k = (tau / dt).ceil().max(0.0) as usize;
    while k > 0 && ((k - 1) as f64) * dt >= tau {
        k -= 1;
    }
    while (k as f64) * dt < tau {
        k += 1;
    }
    k
}

/// Writes cells `from, from + 1, …` of `y_i = a·y_{i−1} + sd·ε_i` (with
/// `y_0 = 0`) into `out`, given `prev = y_{from−1}`. `eps[i−1]` drives step `i`.
pub fn ou_path_segment(a: f64, sd: f64, eps: &[f64], from: usize, prev: f64, out: &mut [f64]) {
    let mut p = prev;
    for (k, o) in out.iter_mut().enumerate() {
        let i = from + k;
        p = if i == 0 { 0.0 } else { p * a + sd * eps[i - 1] };
        *o = p;
    }
}

/// Recomputes `path[from..]`; `path[from − 1]` must be current.
pub fn fill_ou_path(a: f64, sd: f64, eps: &[f64], from: usize, path: &mut [f64]) {
    let prev = if from == 0 { 0.0 } else { path[from - 1] };
    ou_path_segment(a, sd, eps, from, prev, &mut path[from..]);
}

/// Writes the jump OU at cells `from, from + 1, …` into `out`, given
/// `prev = j_{from−1}`. A jump at `τ` enters at the first grid point `≥ τ`.
pub fn jump_path_segment(lambda: f64, jumps: &[Jump], dt: f64, from: usize, prev: f64, out: &mut [f64]) {
    let a = (-dt / lambda).exp();
    let mut k = jumps.partition_point(|j| grid_cell(j.tau, dt) < from);
    let mut p = prev;
    for (m, o) in out.iter_mut().enumerate() {
        let i = from + m;
        let t = i as f64 * dt;
        p = if i == 0 { 0.0 } else { p * a };
        while k < jumps.len() && jumps[k].tau <= t {
            p += jumps[k].xi * (-(t - jumps[k].tau) / lambda).exp();
            k += 1;
        }
        *o = p;
    }
}

/// Recomputes `path[from..]`; `path[from − 1]` must be current.
pub fn fill_jump_path(lambda: f64, jumps: &[Jump], dt: f64, from: usize, path: &mut [f64]) {
    let prev = if from == 0 { 0.0 } else { path[from - 1] };
    jump_path_segment(lambda, jumps, dt, from, prev, &mut path[from..]);
}

/// Jump OU values at grid points `0, dt, …, n_steps·dt`.
pub fn jump_ou_at_grid(lambda: f64, phi: &MarkedPointProcess, n_steps: usize, dt: f64) -> Vec<f64> {
    let mut path = vec![0.0; n_steps + 1];
    fill_jump_path(lambda, phi.points(), dt, 0, &mut path);
    path
}

/// Direct evaluation `Σ_{τ ≤ t} ξ e^{−(t−τ)/λ}`.
pub fn jump_ou_value(lambda: f64, phi: &MarkedPointProcess, t: f64) -> f64 {
    phi.points()
        .iter()
        .take_while(|j| j.tau <= t)
        .map(|j| j.xi * (-(t - j.tau) / lambda).exp())
        .sum()
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Path of length `eps.len() + 1` starting at 0.
pub fn gaussian_ou_from_normals(params: &GaussianOUParams, eps: &[f64], dt: f64) -> Vec<f64> {
    let mut path = vec![0.0; eps.len() + 1];
    fill_ou_path(params.decay(dt), params.step_variance(dt).sqrt(), eps, 0, &mut path);
    path
}

/// Exact simulation of a Gaussian OU path from 0 (`n_steps + 1` values).
pub fn simulate_gaussian_ou(
    params: &GaussianOUParams,
    n_steps: usize,
    dt: f64,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    if n_steps == 0 || !(dt > 0.0) {
        return Err(Error::domain("need n_steps >= 1 and dt > 0"));
    }
    params.validate()?;
    let eps = standard_normals(&mut rng::stream(rng_seed, rng::STREAM_Y1), n_steps);
    Ok(gaussian_ou_from_normals(params, &eps, dt))
}

/// Appends a homogeneous marked Poisson sample on `(t0, t1]` (on `[t0, t1]`
/// when `t0 = 0`) to `out`.
pub fn sample_marked_pp_into<R: Rng + ?Sized>(
    rng: &mut R,
    theta: f64,
    beta: f64,
    t0: f64,
    t1: f64,
    out: &mut Vec<Jump>,
) {
    let mean = theta * (t1 - t0);
    if !(mean > 0.0) {
        return;
    }
    let n = Poisson::new(mean).expect("positive Poisson mean").sample(rng) as usize;
    let sizes = Exp::new(1.0 / beta).expect("positive jump mean");
    let start = out.len();
    loop {
        out.truncate(start);
        for _ in 0..n {
            let mut tau = t1 - (t1 - t0) * rng.random::<f64>();
            if tau <= t0 && t0 > 0.0 {
                tau = t1;
            }
            out.push(Jump {
                tau,
                xi: sizes.sample(rng),
            });
        }
        out[start..].sort_by(|a, b| a.tau.total_cmp(&b.tau));
        if out[start..].windows(2).all(|w| w[0].tau < w[1].tau) {
            break;
        }
    }
}

/// Marked Poisson process on `[0, T]` with intensity `θ` and Exp(mean `β`) sizes.
pub fn simulate_marked_pp(theta: f64, beta: f64, horizon: f64, rng_seed: u64) -> Result<MarkedPointProcess> {
    if !(theta > 0.0 && beta > 0.0 && horizon > 0.0) {
        return Err(Error::domain("theta, beta and T must be positive"));
    }
    let mut rng = rng::stream(rng_seed, rng::STREAM_PHI1);
    let mut pts = Vec::new();
    sample_marked_pp_into(&mut rng, theta, beta, 0.0, horizon, &mut pts);
    MarkedPointProcess::new(pts)
}

fn simulate_jump_component<R: Rng + ?Sized>(
    rng: &mut R,
    params: &JumpComponentParams,
    horizon: f64,
    change_point: Option<f64>,
) -> MarkedPointProcess {
    let mut pts = Vec::new();
    match change_point {
        Some(tc) => {
            let r1 = params.regime(0);
            let r2 = params.regime(1);
            sample_marked_pp_into(rng, r1.theta, r1.beta, 0.0, tc, &mut pts);
            sample_marked_pp_into(rng, r2.theta, r2.beta, tc, horizon, &mut pts);
        }
        None => sample_marked_pp_into(rng, params.theta, params.beta, 0.0, horizon, &mut pts),
    }
    MarkedPointProcess::new(pts).expect("sampled process is valid")
}

/// `y1_i = x_i − y2_i − j1_i + j2_i`.
pub fn reconstruct_y1(x: &[f64], y2: &[f64], j1: &[f64], j2: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if y2.len() != n || j1.len() != n || j2.len() != n {
        return Err(Error::domain("component paths must have equal length"));
    }
    Ok((0..n).map(|i| x[i] - y2[i] - j1[i] + j2[i]).collect())
}

/// A simulated spot path with all components on the grid `t_i = i·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpotPath {
    pub dt: f64,
    pub f: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub price: Vec<f64>,
    pub phi1: MarkedPointProcess,
    pub phi2: MarkedPointProcess,
    /// Normals driving Y2 (empty for the three-factor model).
    pub epsilon: Vec<f64>,
}

impl SpotPath {
    pub fn len(&self) -> usize {
        self.price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_empty()
    }

    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Deseasonalised values `y1 + y2 + j1 − j2`.
    pub fn deseasonalized(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.y1[i] + self.y2[i] + self.j1[i] - self.j2[i])
            .collect()
    }

    pub fn to_series(&self, start: chrono::NaiveDate) -> Result<PriceSeries> {
        PriceSeries::new(start, self.price.clone())
    }
}

/// Simulates `P_i = f(t_i) + Y1 + Y2 + J1 − J2` exactly on `n_steps + 1`
/// grid points. Y1, Y2, Φ1 and Φ2 use separate RNG streams so that shared
/// components coincide across variants.
pub fn simulate_spot(
    params: &ModelParams,
    coeffs: &SeasonalCoefficients,
    spec: &ModelSpec,
    n_steps: usize,
    dt: f64,
    rng_seed: u64,
) -> Result<SpotPath> {
    params.validate(spec)?;
    if n_steps == 0 || !(dt > 0.0) {
        return Err(Error::domain("need n_steps >= 1 and dt > 0"));
    }
    let horizon = n_steps as f64 * dt;
    if let Some(tc) = spec.change_point {
        if tc >= horizon {
            return Err(Error::domain("change point beyond simulated horizon"));
        }
    }

    let z1 = standard_normals(&mut rng::stream(rng_seed, rng::STREAM_Y1), n_steps);
    let y1 = gaussian_ou_from_normals(&params.y1, &z1, dt);
    let (y2, epsilon) = match &params.y2 {
        Some(p) => {
            let eps = standard_normals(&mut rng::stream(rng_seed, rng::STREAM_Y2), n_steps);
            (gaussian_ou_from_normals(p, &eps, dt), eps)
        }
        None => (vec![0.0; n_steps + 1], Vec::new()),
    };
    let phi1 = simulate_jump_component(
        &mut rng::stream(rng_seed, rng::STREAM_PHI1),
        &params.j1,
        horizon,
        spec.change_point,
    );
    let phi2 = simulate_jump_component(
        &mut rng::stream(rng_seed, rng::STREAM_PHI2),
        &params.j2,
        horizon,
        spec.change_point,
    );
    let j1 = jump_ou_at_grid(params.j1.lambda, &phi1, n_steps, dt);
    let j2 = jump_ou_at_grid(params.j2.lambda, &phi2, n_steps, dt);
    let f: Vec<f64> = (0..=n_steps).map(|i| evaluate_f(coeffs, i as f64 * dt)).collect();
    let price = (0..=n_steps)
        .map(|i| f[i] + (y1[i] + y2[i] + j1[i] - j2[i]))
        .collect();
    Ok(SpotPath {
        dt,
        f,
        y1,
        y2,
        j1,
        j2,
        price,
        phi1,
        phi2,
        epsilon,
    })
}
