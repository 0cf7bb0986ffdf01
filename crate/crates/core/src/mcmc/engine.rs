//! The augmented Gibbs sampler.
//!
//! The sampler keeps the latent paths `Y2`, `J1`, `J2`, the reconstructed
//! `Y1` and running sums of squared `Y1` residuals. A proposal that only
//! touches grid cells `≥ k` recomputes those cells with the same recursions
//! used for a full rebuild, so cached values always equal a rebuild from
//! scratch bit for bit and a restarted chain replays exactly.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::dist::{sample_truncated_normal, truncated_normal_log_mass};
use crate::error::{Error, Result};
use crate::likelihood::{
    gaussian_ll_from_rss, lambda_from_rho, log_likelihood_gaussian, log_prior_rho,
    posterior_beta, posterior_sigma_y1_from_rss, posterior_theta, rho_from_lambda, segment_stats,
    PriorSpec,
};
use crate::mcmc::config::McmcConfig;
use crate::mcmc::state::{initial_latent, initial_params, ChainState, Counters, Move};
use crate::model::{
    decay, gaussian_ou_from_normals, grid_cell, jump_ou_at_grid, jump_path_segment,
    ou_path_segment, step_variance, Jump, JumpComponentParams, MarkedPointProcess, ModelSpec,
    Variant,
};
use crate::rng;

/// Which reversion parameter an update acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rho {
    Y1,
    Y2,
    J1,
    J2,
}

/// Positive (`0`) or negative (`1`) jump component.
pub type Side = usize;

#[derive(Clone, Debug, Default)]
struct Paths {
    y2: Vec<f64>,
    j: [Vec<f64>; 2],
    y1: Vec<f64>,
    cum: Vec<f64>,
}

impl Paths {
    fn zeros(len: usize) -> Self {
        Self {
            y2: vec![0.0; len],
            j: [vec![0.0; len], vec![0.0; len]],
            y1: vec![0.0; len],
            cum: vec![0.0; len],
        }
    }
}

/// Sources for a residual recomputation: `true` reads the proposal buffer.
#[derive(Clone, Copy, Default)]
struct Proposed {
    y2: bool,
    j: [bool; 2],
}

pub struct Sampler {
    x: Vec<f64>,
    n: usize,
    dt: f64,
    spec: ModelSpec,
    priors: PriorSpec,
    config: McmcConfig,
    state: ChainState,
    cur: Paths,
    tmp: Paths,
    eps_tmp: Vec<f64>,
    counters: Counters,
    iteration: u64,
    rng: ChaCha8Rng,
}

#[allow(clippy::too_many_arguments)]
fn residual_segment(
    x: &[f64],
    y2: &[f64],
    j1: &[f64],
    j2: &[f64],
    a: f64,
    from: usize,
    prev: (f64, f64),
    y1: &mut [f64],
    cum: &mut [f64],
) {
    let (mut py, mut pc) = prev;
    for i in from..x.len() {
        let y = x[i] - y2[i] - j1[i] + j2[i];
        let c = if i == 0 {
            0.0
        } else {
            let r = y - a * py;
            pc + r * r
        };
        y1[i] = y;
        cum[i] = c;
        py = y;
        pc = c;
    }
}

impl Sampler {
    /// A chain at the default starting values, seeded from `config.rng_seed`.
    pub fn new(
        x: Vec<f64>,
        dt: f64,
        spec: ModelSpec,
        priors: PriorSpec,
        config: McmcConfig,
    ) -> Result<Self> {
        Self::new_chain(x, dt, spec, priors, config, 0)
    }

    /// Like [`Sampler::new`] for the `chain`-th independent chain.
    pub fn new_chain(
        x: Vec<f64>,
        dt: f64,
        spec: ModelSpec,
        priors: PriorSpec,
        config: McmcConfig,
        chain: u64,
    ) -> Result<Self> {
        let n = x.len().saturating_sub(1);
        let params = initial_params(&spec, &priors);
        let latent = initial_latent(&spec, n, config.rng_seed.wrapping_add(chain));
        let state = ChainState {
            params,
            latent,
            log_likelihood: 0.0,
        };
        let rng = rng::stream(config.rng_seed, rng::CHAIN_BASE + chain);
        Self::resume(x, dt, spec, priors, config, state, rng, Counters::default(), 0)
    }

    /// Restores a chain from its full state.
    #[allow(clippy::too_many_arguments)]
    pub fn resume(
        x: Vec<f64>,
        dt: f64,
        spec: ModelSpec,
        priors: PriorSpec,
        config: McmcConfig,
        state: ChainState,
        rng: ChaCha8Rng,
        counters: Counters,
        iteration: u64,
    ) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::domain("need at least two observations"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("observations must be finite"));
        }
        let n = x.len() - 1;
        if (spec.horizon - n as f64 * dt).abs() > 1e-9 * spec.horizon.max(1.0) {
            return Err(Error::domain(format!(
                "model horizon {} does not match {} increments of {dt}",
                spec.horizon, n
            )));
        }
        state.params.validate(&spec)?;
        priors.validate()?;
        config.validate()?;
        let latent = &state.latent;
        if spec.variant.has_y2() != (latent.epsilon.len() == n)
            || (!spec.variant.has_y2() && !latent.epsilon.is_empty())
        {
            return Err(Error::domain("latent increments do not match the variant"));
        }
        if !latent.phi1.within(spec.horizon) || !latent.phi2.within(spec.horizon) {
            return Err(Error::domain("jump times beyond the horizon"));
        }
        let len = x.len();
        let mut s = Self {
            eps_tmp: state.latent.epsilon.clone(),
            x,
            n,
            dt,
            spec,
            priors,
            config,
            state,
            cur: Paths::zeros(len),
            tmp: Paths::zeros(len),
            counters,
            iteration,
            rng,
        };
        s.rebuild();
        Ok(s)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn config(&self) -> &McmcConfig {
        &self.config
    }

    pub fn data(&self) -> &[f64] {
        &self.x
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn y1_path(&self) -> &[f64] {
        &self.cur.y1
    }

    pub fn y2_path(&self) -> &[f64] {
        &self.cur.y2
    }

    pub fn jump_path(&self, side: Side) -> &[f64] {
        &self.cur.j[side]
    }

    pub fn log_likelihood(&self) -> f64 {
        self.state.log_likelihood
    }

    /// Replaces the chain state and rebuilds every cache.
    pub fn set_state(&mut self, state: ChainState) -> Result<()> {
        state.params.validate(&self.spec)?;
        self.eps_tmp.clone_from(&state.latent.epsilon);
        self.state = state;
        self.rebuild();
        Ok(())
    }

    fn flat(&self) -> bool {
        self.config.prior_only
    }

    fn ll_from_rss(&self, rss: f64, lambda: f64, sigma: f64) -> f64 {
        if self.flat() {
            0.0
        } else {
            gaussian_ll_from_rss(self.n, rss, step_variance(lambda, sigma, self.dt))
        }
    }

    fn y2_coeffs(&self, lambda: f64, sigma: f64) -> (f64, f64) {
        (decay(lambda, self.dt), step_variance(lambda, sigma, self.dt).sqrt())
    }

    fn rebuild(&mut self) {
        let p = self.state.params;
        let n1 = self.n + 1;
        if let Some(y2) = p.y2 {
            let (a, sd) = self.y2_coeffs(y2.lambda, y2.sigma);
            ou_path_segment(a, sd, &self.state.latent.epsilon, 0, 0.0, &mut self.cur.y2[..n1]);
        }
        let lam = [p.j1.lambda, p.j2.lambda];
        let phis = [&self.state.latent.phi1, &self.state.latent.phi2];
        for side in 0..2 {
            jump_path_segment(lam[side], phis[side].points(), self.dt, 0, 0.0, &mut self.cur.j[side]);
        }
        let c = &mut self.cur;
        residual_segment(
            &self.x,
            &c.y2,
            &c.j[0],
            &c.j[1],
            decay(p.y1.lambda, self.dt),
            0,
            (0.0, 0.0),
            &mut c.y1,
            &mut c.cum,
        );
        self.state.log_likelihood = self.ll_from_rss(self.cur.cum[self.n], p.y1.lambda, p.y1.sigma);
    }

    /// Recomputes the data log-likelihood from the state alone, without
    /// touching any cache.
    pub fn recompute_log_likelihood(&self) -> Result<f64> {
        if self.flat() {
            return Ok(0.0);
        }
        let p = &self.state.params;
        let y2 = match &p.y2 {
            Some(q) => gaussian_ou_from_normals(q, &self.state.latent.epsilon, self.dt),
            None => vec![0.0; self.n + 1],
        };
        let j1 = jump_ou_at_grid(p.j1.lambda, &self.state.latent.phi1, self.n, self.dt);
        let j2 = jump_ou_at_grid(p.j2.lambda, &self.state.latent.phi2, self.n, self.dt);
        log_likelihood_gaussian(&self.x, &y2, &j1, &j2, &p.y1, self.dt)
    }

    /// Residual sum of squares for a proposal, written to the proposal buffer.
    fn eval_residuals(&mut self, from: usize, src: Proposed, a: f64) -> f64 {
        let prev = if from == 0 {
            (0.0, 0.0)
        } else {
            (self.cur.y1[from - 1], self.cur.cum[from - 1])
        };
        let Self { x, cur, tmp, .. } = self;
        let y2 = if src.y2 { &tmp.y2 } else { &cur.y2 };
        let j1 = if src.j[0] { &tmp.j[0] } else { &cur.j[0] };
        let j2 = if src.j[1] { &tmp.j[1] } else { &cur.j[1] };
        residual_segment(x, y2, j1, j2, a, from, prev, &mut tmp.y1, &mut tmp.cum);
        tmp.cum[self.n]
    }

    fn commit(&mut self, from: usize, src: Proposed, ll: f64) {
        if !self.flat() {
            let r = from..self.n + 1;
            if src.y2 {
                self.cur.y2[r.clone()].copy_from_slice(&self.tmp.y2[r.clone()]);
            }
            for side in 0..2 {
                if src.j[side] {
                    self.cur.j[side][r.clone()].copy_from_slice(&self.tmp.j[side][r.clone()]);
                }
            }
            self.cur.y1[r.clone()].copy_from_slice(&self.tmp.y1[r.clone()]);
            self.cur.cum[r.clone()].copy_from_slice(&self.tmp.cum[r]);
        }
        self.state.log_likelihood = ll;
    }

    fn non_finite(&self, step: &'static str) -> Error {
        Error::NonFinite {
            step,
            iteration: self.iteration,
            dump: serde_json::to_string(&self.state).unwrap_or_default(),
        }
    }

    /// Metropolis–Hastings decision. Always consumes one uniform.
    fn accept(&mut self, step: &'static str, log_alpha: f64) -> Result<bool> {
        let u: f64 = self.rng.random();
        if log_alpha.is_nan() {
            return Err(self.non_finite(step));
        }
        Ok(log_alpha >= 0.0 || u.ln() < log_alpha)
    }

    /// One full sweep of the thirteen update steps.
    pub fn step(&mut self) -> Result<()> {
        self.iteration += 1;
        let variant = self.spec.variant;
        self.update_sigma_y1()?;
        if variant.has_y2() {
            self.update_sigma_y2()?;
        }
        self.update_rho(Rho::Y1)?;
        if variant == Variant::FourFactor {
            self.update_rho(Rho::Y2)?;
        }
        self.update_rho(Rho::J1)?;
        self.update_rho(Rho::J2)?;
        self.update_theta(0)?;
        self.update_theta(1)?;
        self.update_beta(0)?;
        self.update_beta(1)?;
        if variant.has_y2() {
            self.update_epsilon()?;
        }
        self.update_jumps(0)?;
        self.update_jumps(1)?;
        if self.config.verify_every > 0 && self.iteration.is_multiple_of(self.config.verify_every) {
            self.verify()?;
        }
        Ok(())
    }

    /// Checks the cached log-likelihood against a full recomputation.
    pub fn verify(&self) -> Result<()> {
        let fresh = self.recompute_log_likelihood()?;
        let cached = self.state.log_likelihood;
        if (fresh - cached).abs() > 1e-8 * fresh.abs().max(1.0) {
            return Err(Error::domain(format!(
                "cached log-likelihood {cached} drifted from recomputed {fresh} at iteration {}",
                self.iteration
            )));
        }
        Ok(())
    }

    /// Conjugate draw of `σ²_{Y1}`.
    pub fn update_sigma_y1(&mut self) -> Result<()> {
        let p = self.state.params.y1;
        let pr = (self.priors.sigma_y1.a, self.priors.sigma_y1.b);
        let (n, rss) = if self.flat() { (0, 0.0) } else { (self.n, self.cur.cum[self.n]) };
        let post = posterior_sigma_y1_from_rss(pr, n, rss, p.lambda, self.dt)?;
        let sigma = post.sample(&mut self.rng).sqrt();
        self.state.params.y1.sigma = sigma;
        self.state.log_likelihood = self.ll_from_rss(rss, p.lambda, sigma);
        Ok(())
    }

    /// Log acceptance ratio and committed-on-accept proposal for a new `Y2`
    /// law `(λ, σ)`; returns the log-likelihood change.
    fn propose_y2(&mut self, lambda: f64, sigma: f64) -> f64 {
        if self.flat() {
            return 0.0;
        }
        let (a, sd) = self.y2_coeffs(lambda, sigma);
        ou_path_segment(a, sd, &self.state.latent.epsilon, 0, 0.0, &mut self.tmp.y2);
        let y1 = self.state.params.y1;
        let rss = self.eval_residuals(0, Proposed { y2: true, ..Default::default() }, decay(y1.lambda, self.dt));
        self.ll_from_rss(rss, y1.lambda, y1.sigma) - self.state.log_likelihood
    }

    /// Metropolis step for `σ_{Y2}` with a positive truncated-normal proposal
    /// and a flat prior.
    pub fn update_sigma_y2(&mut self) -> Result<()> {
        let Some(y2) = self.state.params.y2 else {
            return Ok(());
        };
        let s = self.config.proposal_scales.sigma_y2;
        let prop = sample_truncated_normal(&mut self.rng, y2.sigma, s, 0.0, f64::INFINITY);
        let dll = self.propose_y2(y2.lambda, prop);
        let corr = if s > 0.0 {
            truncated_normal_log_mass(y2.sigma, s, 0.0, f64::INFINITY)
                - truncated_normal_log_mass(prop, s, 0.0, f64::INFINITY)
        } else {
            0.0
        };
        let ok = self.accept("sigma_y2", dll + corr)?;
        self.counters.record(Move::SigmaY2, ok);
        if ok {
            let ll = self.state.log_likelihood + dll;
            self.commit(0, Proposed { y2: true, ..Default::default() }, ll);
            if let Some(y) = self.state.params.y2.as_mut() {
                y.sigma = prop;
            }
        }
        Ok(())
    }

    fn lambda_of(&self, which: Rho) -> f64 {
        let p = &self.state.params;
        match which {
            Rho::Y1 => p.y1.lambda,
            Rho::Y2 => p.y2.map_or(f64::INFINITY, |y| y.lambda),
            Rho::J1 => p.j1.lambda,
            Rho::J2 => p.j2.lambda,
        }
    }

    /// Metropolis step for `ρ = e^{−u/λ}` with a truncated-normal proposal
    /// on `(0, 1)`.
    pub fn update_rho(&mut self, which: Rho) -> Result<()> {
        let (scale, prior, mv, name) = match which {
            Rho::Y1 => (self.config.proposal_scales.rho_y1, self.priors.lambda_y1, Move::RhoY1, "rho_y1"),
            Rho::Y2 => (self.config.proposal_scales.rho_y2, self.priors.lambda_y2, Move::RhoY2, "rho_y2"),
            Rho::J1 => (self.config.proposal_scales.rho_j1, self.priors.lambda_j1, Move::RhoJ1, "rho_j1"),
            Rho::J2 => (self.config.proposal_scales.rho_j2, self.priors.lambda_j2, Move::RhoJ2, "rho_j2"),
        };
        let lambda = self.lambda_of(which);
        if lambda.is_infinite() {
            return Ok(());
        }
        let u = self.config.rho_time_unit;
        let rho = rho_from_lambda(lambda, u);
        let rho_new = sample_truncated_normal(&mut self.rng, rho, scale, 0.0, 1.0);
        let lambda_new = if rho_new == rho { lambda } else { lambda_from_rho(rho_new, u) };

        let (dll, src) = if !(lambda_new > 0.0 && lambda_new.is_finite()) || rho_new <= 0.0 || rho_new >= 1.0 {
            (f64::NEG_INFINITY, Proposed::default())
        } else {
            self.propose_lambda(which, lambda_new)
        };
        let lp = |r: f64| log_prior_rho(r, prior.a, prior.b).unwrap_or(f64::NEG_INFINITY);
        let corr = if scale > 0.0 {
            truncated_normal_log_mass(rho, scale, 0.0, 1.0)
                - truncated_normal_log_mass(rho_new, scale, 0.0, 1.0)
        } else {
            0.0
        };
        let log_alpha = if dll == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            dll + lp(rho_new) - lp(rho) + corr
        };
        let ok = self.accept(name, log_alpha)?;
        self.counters.record(mv, ok);
        if ok {
            let ll = self.state.log_likelihood + dll;
            self.commit(0, src, ll);
            let p = &mut self.state.params;
            match which {
                Rho::Y1 => p.y1.lambda = lambda_new,
                Rho::Y2 => {
                    if let Some(y) = p.y2.as_mut() {
                        y.lambda = lambda_new
                    }
                }
                Rho::J1 => p.j1.lambda = lambda_new,
                Rho::J2 => p.j2.lambda = lambda_new,
            }
        }
        Ok(())
    }

    fn propose_lambda(&mut self, which: Rho, lambda: f64) -> (f64, Proposed) {
        if self.flat() {
            return (0.0, Proposed::default());
        }
        let y1 = self.state.params.y1;
        match which {
            Rho::Y1 => {
                let rss = self.eval_residuals(0, Proposed::default(), decay(lambda, self.dt));
                (self.ll_from_rss(rss, lambda, y1.sigma) - self.state.log_likelihood, Proposed::default())
            }
            Rho::Y2 => {
                let sigma = self.state.params.y2.map_or(0.0, |y| y.sigma);
                let src = Proposed { y2: true, ..Default::default() };
                (self.propose_y2(lambda, sigma), src)
            }
            Rho::J1 | Rho::J2 => {
                let side = if which == Rho::J1 { 0 } else { 1 };
                let mut src = Proposed::default();
                src.j[side] = true;
                let phi = if side == 0 { &self.state.latent.phi1 } else { &self.state.latent.phi2 };
                jump_path_segment(lambda, phi.points(), self.dt, 0, 0.0, &mut self.tmp.j[side]);
                let rss = self.eval_residuals(0, src, decay(y1.lambda, self.dt));
                (self.ll_from_rss(rss, y1.lambda, y1.sigma) - self.state.log_likelihood, src)
            }
        }
    }

    fn jump_params(&self, side: Side) -> JumpComponentParams {
        if side == 0 {
            self.state.params.j1
        } else {
            self.state.params.j2
        }
    }

    fn phi(&self, side: Side) -> &MarkedPointProcess {
        if side == 0 {
            &self.state.latent.phi1
        } else {
            &self.state.latent.phi2
        }
    }

    fn phi_mut(&mut self, side: Side) -> &mut MarkedPointProcess {
        if side == 0 {
            &mut self.state.latent.phi1
        } else {
            &mut self.state.latent.phi2
        }
    }

    /// Conjugate draw of the jump intensity (per regime).
    pub fn update_theta(&mut self, side: Side) -> Result<()> {
        let prior = if side == 0 { self.priors.theta_1 } else { self.priors.theta_2 };
        let cp = self.spec.change_point;
        let s = segment_stats(self.phi(side), self.spec.horizon, cp);
        let mut p = self.jump_params(side);
        p.theta = posterior_theta((prior.a, prior.b), s.count[0], s.length[0])?.sample(&mut self.rng);
        if let Some(r) = p.after_change.as_mut() {
            r.theta = posterior_theta((prior.a, prior.b), s.count[1], s.length[1])?.sample(&mut self.rng);
        }
        self.set_jump_params(side, p);
        Ok(())
    }

    /// Conjugate draw of the mean jump size (per regime).
    pub fn update_beta(&mut self, side: Side) -> Result<()> {
        let prior = if side == 0 { self.priors.beta_1 } else { self.priors.beta_2 };
        let cp = self.spec.change_point;
        let s = segment_stats(self.phi(side), self.spec.horizon, cp);
        let mut p = self.jump_params(side);
        p.beta = posterior_beta((prior.a, prior.b), s.count[0], s.sum[0])?.sample(&mut self.rng);
        if let Some(r) = p.after_change.as_mut() {
            r.beta = posterior_beta((prior.a, prior.b), s.count[1], s.sum[1])?.sample(&mut self.rng);
        }
        self.set_jump_params(side, p);
        Ok(())
    }

    fn set_jump_params(&mut self, side: Side, p: JumpComponentParams) {
        if side == 0 {
            self.state.params.j1 = p;
        } else {
            self.state.params.j2 = p;
        }
    }

    /// `loops_latent_ou` replacement or permutation moves on `𝓔`.
    pub fn update_epsilon(&mut self) -> Result<()> {
        if self.state.params.y2.is_none() || self.n == 0 {
            return Ok(());
        }
        for _ in 0..self.config.loops_latent_ou {
            if self.rng.random::<bool>() {
                let k = self.config.increments_per_loop.min(self.n);
                let idx = rand::seq::index::sample(&mut self.rng, self.n, k).into_vec();
                for &i in &idx {
                    self.eps_tmp[i] = StandardNormal.sample(&mut self.rng);
                }
                self.finish_epsilon_move(&idx, Move::EpsilonReplace, "epsilon_replace")?;
            } else {
                let k = self.config.permutations_per_loop.min(self.n);
                let idx = rand::seq::index::sample(&mut self.rng, self.n, k).into_vec();
                let mut vals: Vec<f64> = idx.iter().map(|&i| self.eps_tmp[i]).collect();
                vals.shuffle(&mut self.rng);
                for (&i, v) in idx.iter().zip(vals) {
                    self.eps_tmp[i] = v;
                }
                self.finish_epsilon_move(&idx, Move::EpsilonPermute, "epsilon_permute")?;
            }
        }
        Ok(())
    }

    fn finish_epsilon_move(&mut self, idx: &[usize], mv: Move, name: &'static str) -> Result<()> {
        let Some(&first) = idx.iter().min() else {
            return Ok(());
        };
        let from = first + 1;
        let dll = if self.flat() {
            0.0
        } else {
            let y2 = self.state.params.y2.expect("Y2 present");
            let (a, sd) = self.y2_coeffs(y2.lambda, y2.sigma);
            let prev = self.cur.y2[from - 1];
            ou_path_segment(a, sd, &self.eps_tmp, from, prev, &mut self.tmp.y2[from..]);
            let y1 = self.state.params.y1;
            let rss = self.eval_residuals(from, Proposed { y2: true, ..Default::default() }, decay(y1.lambda, self.dt));
            self.ll_from_rss(rss, y1.lambda, y1.sigma) - self.state.log_likelihood
        };
        let ok = self.accept(name, dll)?;
        self.counters.record(mv, ok);
        if ok {
            let ll = self.state.log_likelihood + dll;
            self.commit(from, Proposed { y2: true, ..Default::default() }, ll);
            for &i in idx {
                self.state.latent.epsilon[i] = self.eps_tmp[i];
            }
        } else {
            for &i in idx {
                self.eps_tmp[i] = self.state.latent.epsilon[i];
            }
        }
        Ok(())
    }

    /// Log-likelihood change if the jump set of `side` is replaced by
    /// `jumps`, which differs from the current set only at cells `>= from`.
    pub fn jump_proposal_dll(&mut self, side: Side, jumps: &[Jump], from: usize) -> f64 {
        if self.flat() {
            return 0.0;
        }
        let lambda = self.jump_params(side).lambda;
        let prev = if from == 0 { 0.0 } else { self.cur.j[side][from - 1] };
        jump_path_segment(lambda, jumps, self.dt, from, prev, &mut self.tmp.j[side][from..]);
        let mut src = Proposed::default();
        src.j[side] = true;
        let y1 = self.state.params.y1;
        let rss = self.eval_residuals(from, src, decay(y1.lambda, self.dt));
        self.ll_from_rss(rss, y1.lambda, y1.sigma) - self.state.log_likelihood
    }

    fn commit_jumps(&mut self, side: Side, jumps: Vec<Jump>, from: usize, dll: f64) {
        let mut src = Proposed::default();
        src.j[side] = true;
        let ll = self.state.log_likelihood + dll;
        self.commit(from, src, ll);
        *self.phi_mut(side) = MarkedPointProcess::new(jumps).expect("moves keep the jump set valid");
    }

    /// All jump moves of one Gibbs step for one component.
    pub fn update_jumps(&mut self, side: Side) -> Result<()> {
        for _ in 0..self.config.loops_birth_death {
            self.birth_death(side)?;
        }
        for _ in 0..self.config.loops_displacement {
            self.displace(side)?;
        }
        for _ in 0..self.config.loops_multiplicative {
            self.multiply(side)?;
        }
        Ok(())
    }

    fn integrated_intensity(&self, side: Side) -> f64 {
        self.jump_params(side)
            .integrated_intensity(self.spec.horizon, self.spec.change_point)
    }

    /// Draws a birth location from the intensity-weighted mixture over regimes.
    pub fn draw_birth_time(&mut self, side: Side) -> f64 {
        let t = self.spec.horizon;
        match self.spec.change_point {
            Some(tc) => {
                let p = self.jump_params(side);
                let w1 = p.regime(0).theta * tc;
                let w2 = p.regime(1).theta * (t - tc);
                let u: f64 = self.rng.random();
                let v: f64 = self.rng.random();
                if u * (w1 + w2) < w1 {
                    tc * v
                } else {
                    tc + (t - tc) * (1.0 - v)
                }
            }
            None => t * self.rng.random::<f64>(),
        }
    }

    /// One birth-or-death proposal.
    pub fn birth_death(&mut self, side: Side) -> Result<()> {
        let p_birth = self.config.birth_prob;
        let log_odds = ((1.0 - p_birth) / p_birth).ln();
        let theta_total = self.integrated_intensity(side);
        let params = self.jump_params(side);
        let cp = self.spec.change_point;
        let n = self.phi(side).len();
        let (mv_b, mv_d) = if side == 0 { (Move::Birth1, Move::Death1) } else { (Move::Birth2, Move::Death2) };

        if self.rng.random::<f64>() < p_birth {
            let tau = loop {
                let tau = self.draw_birth_time(side);
                if self.phi(side).insertion_index(tau).is_some() {
                    break tau;
                }
            };
            let beta = params.regime_at(tau, cp).beta;
            let xi = Exp::new(1.0 / beta).expect("positive beta").sample(&mut self.rng);
            let mut jumps = self.phi(side).points().to_vec();
            let k = self.phi(side).insertion_index(tau).expect("checked above");
            jumps.insert(k, Jump { tau, xi });
            let from = grid_cell(tau, self.dt);
            let dll = self.jump_proposal_dll(side, &jumps, from);
            let log_r = dll + log_odds + theta_total.ln() - ((n + 1) as f64).ln();
            let ok = self.accept("birth", log_r)?;
            self.counters.record(mv_b, ok);
            if ok {
                self.commit_jumps(side, jumps, from, dll);
            }
        } else {
            if n == 0 {
                return Ok(());
            }
            let k = self.rng.random_range(0..n);
            let mut jumps = self.phi(side).points().to_vec();
            let removed = jumps.remove(k);
            let from = grid_cell(removed.tau, self.dt);
            let dll = self.jump_proposal_dll(side, &jumps, from);
            let log_r = dll - log_odds - theta_total.ln() + (n as f64).ln();
            let ok = self.accept("death", log_r)?;
            self.counters.record(mv_d, ok);
            if ok {
                self.commit_jumps(side, jumps, from, dll);
            }
        }
        Ok(())
    }

    /// Moves one jump uniformly between its neighbours, rescaling its size
    /// so the path after the new time is unchanged.
    pub fn displace(&mut self, side: Side) -> Result<()> {
        let n = self.phi(side).len();
        if n == 0 {
            return Ok(());
        }
        let params = self.jump_params(side);
        let cp = self.spec.change_point;
        let k = self.rng.random_range(0..n);
        let mut jumps = self.phi(side).points().to_vec();
        let old = jumps[k];
        let lo = if k == 0 { 0.0 } else { jumps[k - 1].tau };
        let hi = if k + 1 == n { self.spec.horizon } else { jumps[k + 1].tau };
        let tau = loop {
            let t = lo + (hi - lo) * self.rng.random::<f64>();
            let clash = (k > 0 && t <= lo) || (k + 1 < n && t >= hi);
            if !clash {
                break t;
            }
        };
        let xi = old.xi * (-(tau - old.tau) / params.lambda).exp();
        jumps[k] = Jump { tau, xi };
        let from = grid_cell(old.tau.min(tau), self.dt);
        let valid = xi > 0.0 && xi.is_finite();
        let dll = if valid { self.jump_proposal_dll(side, &jumps, from) } else { f64::NEG_INFINITY };
        let r_old = params.regime_at(old.tau, cp);
        let r_new = params.regime_at(tau, cp);
        let log_r = if valid {
            dll + (r_new.theta / r_old.theta).ln() + (r_old.beta / r_new.beta).ln() - xi / r_new.beta
                + old.xi / r_old.beta
                - (tau - old.tau) / params.lambda
        } else {
            f64::NEG_INFINITY
        };
        let ok = self.accept("displacement", log_r)?;
        self.counters.record(if side == 0 { Move::Displace1 } else { Move::Displace2 }, ok);
        if ok {
            self.commit_jumps(side, jumps, from, dll);
        }
        Ok(())
    }

    /// Joint log-normal rescaling of all jump sizes.
    pub fn multiply(&mut self, side: Side) -> Result<()> {
        let n = self.phi(side).len();
        if n == 0 {
            return Ok(());
        }
        let params = self.jump_params(side);
        let cp = self.spec.change_point;
        let c = (self.config.multiplicative_scale_constant / n as f64).sqrt();
        let mut jumps = self.phi(side).points().to_vec();
        let mut log_prior = 0.0;
        let mut log_jac = 0.0;
        for j in jumps.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let new_xi = j.xi * (c * z).exp();
            log_prior -= (new_xi - j.xi) / params.regime_at(j.tau, cp).beta;
            log_jac += (new_xi / j.xi).ln();
            j.xi = new_xi;
        }
        let valid = jumps.iter().all(|j| j.xi > 0.0 && j.xi.is_finite());
        let from = grid_cell(jumps[0].tau, self.dt);
        let dll = if valid { self.jump_proposal_dll(side, &jumps, from) } else { f64::NEG_INFINITY };
        let log_r = if valid { dll + log_prior + log_jac } else { f64::NEG_INFINITY };
        let ok = self.accept("multiplicative", log_r)?;
        self.counters.record(if side == 0 { Move::Multiply1 } else { Move::Multiply2 }, ok);
        if ok {
            self.commit_jumps(side, jumps, from, dll);
        }
        Ok(())
    }
}

/// One Gibbs sweep from `state`, drawing randomness from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_step(
    state: ChainState,
    spec: &ModelSpec,
    priors: &PriorSpec,
    config: &McmcConfig,
    data: &[f64],
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ChainState> {
    let mut s = Sampler::resume(
        data.to_vec(),
        dt,
        *spec,
        *priors,
        *config,
        state,
        rng.clone(),
        Counters::default(),
        0,
    )?;
    s.step()?;
    *rng = s.rng.clone();
    Ok(s.state)
}
