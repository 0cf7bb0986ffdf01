mod oracles;

use oracles::{close, random_case};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spotfactor_core::likelihood::{
    log_joint, log_likelihood_gaussian, log_likelihood_jump_component, DominatingMeasure,
};
use spotfactor_core::model::{gaussian_ou_from_normals, jump_ou_at_grid};

const TOL: f64 = 1e-10;

#[test]
fn gaussian_likelihood_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let c = random_case(&mut rng);
        let n = c.x.len() - 1;
        let y2 = match &c.params.y2 {
            Some(p) => oracles::y2_path(p, &c.latent.epsilon, c.dt),
            None => vec![0.0; n + 1],
        };
        let j1 = oracles::jump_grid(c.params.j1.lambda, &c.latent.phi1, n, c.dt);
        let j2 = oracles::jump_grid(c.params.j2.lambda, &c.latent.phi2, n, c.dt);
        let direct = oracles::gaussian_ll(&c.x, &y2, &j1, &j2, &c.params.y1, c.dt);

        // library paths, library likelihood
        let ly2 = match &c.params.y2 {
            Some(p) => gaussian_ou_from_normals(p, &c.latent.epsilon, c.dt),
            None => vec![0.0; n + 1],
        };
        let lj1 = jump_ou_at_grid(c.params.j1.lambda, &c.latent.phi1, n, c.dt);
        let lj2 = jump_ou_at_grid(c.params.j2.lambda, &c.latent.phi2, n, c.dt);
        let lib = log_likelihood_gaussian(&c.x, &ly2, &lj1, &lj2, &c.params.y1, c.dt).unwrap();
        assert!(close(lib, direct, TOL), "{lib} vs {direct}");
    }
}

#[test]
fn marked_pp_likelihood_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let c = random_case(&mut rng);
        let cp = c.spec.change_point;
        for (phi, p) in [(&c.latent.phi1, &c.params.j1), (&c.latent.phi2, &c.params.j2)] {
            let lib = log_likelihood_jump_component(phi, p, c.spec.horizon, cp, c.reference);
            let direct = oracles::marked_pp_ll(phi, p, c.spec.horizon, cp, c.reference);
            assert!(close(lib, direct, TOL), "{lib} vs {direct}");
        }
    }
}

#[test]
fn joint_density_factorises() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let c = random_case(&mut rng);
        let unit = 1.0 / 365.0;
        let n = c.x.len() - 1;
        let y2 = match &c.params.y2 {
            Some(p) => oracles::y2_path(p, &c.latent.epsilon, c.dt),
            None => vec![0.0; n + 1],
        };
        let j1 = oracles::jump_grid(c.params.j1.lambda, &c.latent.phi1, n, c.dt);
        let j2 = oracles::jump_grid(c.params.j2.lambda, &c.latent.phi2, n, c.dt);
        let cp = c.spec.change_point;
        let h = c.spec.horizon;
        let expected = oracles::gaussian_ll(&c.x, &y2, &j1, &j2, &c.params.y1, c.dt)
            + oracles::marked_pp_ll(&c.latent.phi1, &c.params.j1, h, cp, c.reference)
            + oracles::marked_pp_ll(&c.latent.phi2, &c.params.j2, h, cp, c.reference)
            + oracles::log_normal_density(&c.latent.epsilon)
            + oracles::log_prior(&c.priors, &c.params, unit);
        let lib = log_joint(&c.x, &c.latent, &c.params, &c.spec, &c.priors, c.dt, unit, c.reference).unwrap();
        assert!(close(lib, expected, TOL), "{lib} vs {expected}");
    }
}

/// Changing the reference law shifts every log-likelihood by a constant, so
/// likelihood ratios between parameter values do not depend on it.
#[test]
fn likelihood_ratios_do_not_depend_on_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let c = random_case(&mut rng);
        let other = oracles::random_case(&mut rng);
        let (phi, p) = (&c.latent.phi1, &c.params.j1);
        let q = {
            let mut q = *p;
            q.theta = other.params.j1.theta;
            q.beta = other.params.j1.beta;
            if let (Some(r), Some(o)) = (q.after_change.as_mut(), other.params.j1.after_change) {
                *r = o;
            }
            q
        };
        let h = c.spec.horizon;
        let cp = c.spec.change_point;
        let ratio = |r: DominatingMeasure| {
            log_likelihood_jump_component(phi, &q, h, cp, r) - log_likelihood_jump_component(phi, p, h, cp, r)
        };
        let a = ratio(c.reference);
        let b = ratio(DominatingMeasure::default());
        assert!(close(a, b, 1e-9), "{a} vs {b}");
    }
}
