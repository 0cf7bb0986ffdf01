use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use spotfactor_core::diagnostics::{acf, iteration_pvalues, ks_test, y1_residuals, PVALUE_NAMES};
use spotfactor_core::mcmc::ChainState;
use spotfactor_core::model::{
    simulate_gaussian_ou, simulate_spot, standard_normals, GaussianOUParams, JumpComponentParams,
    LatentState, ModelParams, ModelSpec, Variant,
};
use spotfactor_core::rng::{stream, STREAM_Y1};
use spotfactor_core::seasonality::SeasonalCoefficients;
use spotfactor_core::series::DAILY_DT;

#[test]
fn residuals_recover_driving_normals() {
    for (lambda, sigma, dt) in [(0.05, 42.7, DAILY_DT), (2.0, 0.3, 0.5), (1e-3, 10.0, DAILY_DT)] {
        let p = GaussianOUParams::new(lambda, sigma).unwrap();
        let y = simulate_gaussian_ou(&p, 500, dt, 17).unwrap();
        let z = standard_normals(&mut stream(17, STREAM_Y1), 500);
        for (r, e) in y1_residuals(&y, &p, dt).iter().zip(&z) {
            assert!((r - e).abs() < 1e-9 * e.abs().max(1.0), "{r} vs {e}");
        }
    }
}

#[test]
fn white_noise_autocorrelation_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20_000;
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let r = acf(&x, 25).unwrap();
    assert_eq!(r[0], 1.0);
    let bound = 4.0 / (n as f64).sqrt();
    assert!(r[1..].iter().all(|v| v.abs() < bound), "{r:?}");
}

#[test]
fn ks_rejection_rate_is_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = Uniform::new(0.0, 1.0).unwrap();
    let reps = 4000;
    let rejected = (0..reps)
        .filter(|_| {
            let s: Vec<f64> = (0..300).map(|_| u.sample(&mut rng)).collect();
            ks_test(&s, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejected as f64 / reps as f64;
    assert!((rate - 0.05).abs() < 0.015, "rejection rate {rate}");
}

/// With the true parameters and latent state every test is on its null, so
/// each p-value should exceed 5% in about 95% of simulated data sets.
#[test]
fn true_state_passes_diagnostics() {
    let params = ModelParams {
        y1: GaussianOUParams::new(0.05, 42.7).unwrap(),
        y2: Some(GaussianOUParams::new(0.01, 20.0).unwrap()),
        j1: JumpComponentParams::new(0.006, 60.0, 4.0).with_change(120.0, 8.0),
        j2: JumpComponentParams::new(0.002, 60.0, 7.0).with_change(40.0, 3.0),
    };
    let days = 730;
    let spec = ModelSpec::new(Variant::FourFactor, days as f64 * DAILY_DT).with_change_point(1.0);
    let mut passed = [0usize; 6];
    let seeds = 100;
    for seed in 0..seeds {
        let p = simulate_spot(&params, &SeasonalCoefficients::zero(), &spec, days, DAILY_DT, seed).unwrap();
        let state = ChainState {
            params,
            latent: LatentState {
                epsilon: p.epsilon.clone(),
                phi1: p.phi1.clone(),
                phi2: p.phi2.clone(),
            },
            log_likelihood: 0.0,
        };
        let pv = iteration_pvalues(&state, &p.deseasonalized(), &spec, DAILY_DT, false).unwrap();
        for (k, v) in pv.values().iter().enumerate() {
            if v.expect("all tests defined") > 0.05 {
                passed[k] += 1;
            }
        }
    }
    for (name, n) in PVALUE_NAMES.iter().zip(passed) {
        assert!(n >= 85, "{name}: {n}/{seeds} above 0.05");
    }
}
