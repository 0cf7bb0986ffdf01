//! Probability distributions used by the sampler and the diagnostics.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 − Φ(x)` without cancellation in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Inverse gamma with density `b^a/Γ(a) x^{−a−1} e^{−b/x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::domain(format!(
                "inverse gamma needs positive parameters, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    /// Mean, infinite for `shape <= 1`.
    pub fn mean(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * x.ln()
            - self.scale / x
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            gamma_ur(self.shape, self.scale / x)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = rand_distr::Gamma::new(self.shape, 1.0)
            .expect("validated shape")
            .sample(rng);
        self.scale / g
    }
}

/// Gamma in shape–rate form, density `b^a/Γ(a) x^{a−1} e^{−bx}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub shape: f64,
    pub rate: f64,
}

impl Gamma {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::domain(format!(
                "gamma needs positive parameters, got ({shape}, {rate})"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln()
            - self.rate * x
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            gamma_lr(self.shape, self.rate * x)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated parameters")
            .sample(rng)
    }
}

/// `ln(Φ((hi−μ)/s) − Φ((lo−μ)/s))`, the log mass of `N(μ, s²)` on `(lo, hi)`.
pub fn truncated_normal_log_mass(mu: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let a = (lo - mu) / sd;
    let b = (hi - mu) / sd;
    let mass = if a > 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    };
    mass.ln()
}

/// Draws from `N(μ, s²)` restricted to the open interval `(lo, hi)`.
/// A zero scale returns `μ`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sd: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    if sd == 0.0 {
        return mu;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let x = mu + sd * z;
        if x > lo && x < hi {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn inverse_gamma_density_and_cdf_agree() {
        let d = InverseGamma::new(2.5, 4.0).unwrap();
        let area = simpson(|x| if x > 0.0 { d.ln_pdf(x).exp() } else { 0.0 }, 0.0, 3.0, 20000);
        assert_abs_diff_eq!(area, d.cdf(3.0), epsilon = 1e-8);
        assert_abs_diff_eq!(d.mean(), 4.0 / 1.5, epsilon = 1e-15);
    }

    #[test]
    fn gamma_density_and_cdf_agree() {
        let d = Gamma::new(3.0, 2.0).unwrap();
        let area = simpson(|x| d.ln_pdf(x.max(1e-300)).exp(), 0.0, 2.5, 20000);
        assert_abs_diff_eq!(area, d.cdf(2.5), epsilon = 1e-8);
    }

    #[test]
    fn sample_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ig = InverseGamma::new(5.0, 8.0).unwrap();
        let n = 200_000;
        let m: f64 = (0..n).map(|_| ig.sample(&mut rng)).sum::<f64>() / n as f64;
        // sd of IG(5,8) is 8/(4·√3)
        assert!((m - 2.0).abs() < 4.0 * (8.0 / (4.0 * 3f64.sqrt())) / (n as f64).sqrt());
        let g = Gamma::new(4.0, 2.0).unwrap();
        let m: f64 = (0..n).map(|_| g.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 2.0).abs() < 4.0 * 1.0 / (n as f64).sqrt());
    }

    #[test]
    fn truncated_mass() {
        assert_abs_diff_eq!(truncated_normal_log_mass(0.0, 1.0, 0.0, f64::INFINITY), 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            truncated_normal_log_mass(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY),
            0.0,
            epsilon = 1e-15
        );
        // deep upper tail keeps relative precision
        let lm = truncated_normal_log_mass(0.0, 1.0, 30.0, f64::INFINITY);
        assert!(lm.is_finite() && lm < -400.0);
    }

    #[test]
    fn truncated_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let x = sample_truncated_normal(&mut rng, 0.99, 0.05, 0.0, 1.0);
            assert!(x > 0.0 && x < 1.0);
        }
        assert_eq!(sample_truncated_normal(&mut rng, 0.3, 0.0, 0.0, 1.0), 0.3);
    }
}
