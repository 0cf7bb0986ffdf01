//! Deterministic seasonal level: linear trend with hinge breaks plus annual
//! and semi-annual harmonics, fitted by least squares.

use std::f64::consts::PI;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::PriceSeries;

/// A trend break at grid time `t` (years from the series start).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
    pub t: f64,
}

/// Coefficients of
/// `f(t) = a1 + a2 t + a3 sin 2πt + a4 cos 2πt + a5 sin 4πt + a6 cos 4πt + Σ c_k (t − κ_k)_+`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    #[serde(default)]
    pub knots: Vec<Knot>,
    /// Slope increment at each knot.
    #[serde(default)]
    pub slopes: Vec<f64>,
    /// Calendar date of grid time 0, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_date: Option<NaiveDate>,
}

impl SeasonalCoefficients {
    pub fn zero() -> Self {
        Self::harmonic([0.0; 6])
    }

    pub fn harmonic(a: [f64; 6]) -> Self {
        Self {
            a1: a[0],
            a2: a[1],
            a3: a[2],
            a4: a[3],
            a5: a[4],
            a6: a[5],
            knots: Vec::new(),
            slopes: Vec::new(),
            start_date: None,
        }
    }

    pub fn with_hinges(mut self, knots: &[f64], slopes: &[f64]) -> Self {
        self.knots = knots.iter().map(|&t| Knot { date: None, t }).collect();
        self.slopes = slopes.to_vec();
        self
    }

    fn base(&self) -> [f64; 6] {
        [self.a1, self.a2, self.a3, self.a4, self.a5, self.a6]
    }

    pub fn validate(&self) -> Result<()> {
        if self.base().iter().chain(&self.slopes).any(|v| !v.is_finite()) {
            return Err(Error::domain("seasonal coefficients must be finite"));
        }
        if self.knots.len() != self.slopes.len() {
            return Err(Error::domain("one slope increment per knot required"));
        }
        if self.knots.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::domain("knots must be strictly increasing"));
        }
        Ok(())
    }

    /// Trend slope on each segment between knots (first entry is `a2`).
    pub fn segment_slopes(&self) -> Vec<f64> {
        let mut out = vec![self.a2];
        let mut acc = self.a2;
        for c in &self.slopes {
            acc += c;
            out.push(acc);
        }
        out
    }
}

fn basis_row(t: f64, knots: &[f64]) -> Vec<f64> {
    let w = 2.0 * PI * t;
    let mut row = vec![1.0, t, w.sin(), w.cos(), (2.0 * w).sin(), (2.0 * w).cos()];
    row.extend(knots.iter().map(|k| (t - k).max(0.0)));
    row
}

/// Evaluates the seasonal level at grid time `t`.
pub fn evaluate_f(coeffs: &SeasonalCoefficients, t: f64) -> f64 {
    let w = 2.0 * PI * t;
    let mut f = coeffs.a1
        + coeffs.a2 * t
        + coeffs.a3 * w.sin()
        + coeffs.a4 * w.cos()
        + coeffs.a5 * (2.0 * w).sin()
        + coeffs.a6 * (2.0 * w).cos();
    for (k, c) in coeffs.knots.iter().zip(&coeffs.slopes) {
        f += c * (t - k.t).max(0.0);
    }
    f
}

/// The design matrix used by [`fit_seasonal`], exposed for diagnostics.
pub fn design_matrix(series: &PriceSeries, knots: &[f64]) -> DMatrix<f64> {
    let p = 6 + knots.len();
    let mut x = DMatrix::zeros(series.len(), p);
    for i in 0..series.len() {
        for (j, v) in basis_row(series.time_at(i), knots).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    x
}

/// Least-squares fit through a Householder QR factorisation.
pub fn fit_seasonal(series: &PriceSeries, knots: &[f64]) -> Result<SeasonalCoefficients> {
    let p = 6 + knots.len();
    if series.len() <= p {
        return Err(Error::domain(format!(
            "need more than {p} observations to fit {p} coefficients, got {}",
            series.len()
        )));
    }
    let horizon = series.horizon();
    if knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("knots must be strictly increasing"));
    }
    if let Some(k) = knots.iter().find(|&&k| !(k > 0.0 && k < horizon)) {
        return Err(Error::domain(format!(
            "knot at t={k} outside the open fit window (0, {horizon})"
        )));
    }

    let x = design_matrix(series, knots);
    let y = DVector::from_column_slice(series.values());
    let qr = x.qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if let Some(i) = (0..p).find(|&i| r[(i, i)].abs() <= 1e-10 * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular(format!("column {i} is linearly dependent")));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;

    let mut coeffs = SeasonalCoefficients::harmonic([
        beta[0], beta[1], beta[2], beta[3], beta[4], beta[5],
    ]);
    coeffs.knots = knots.iter().map(|&t| Knot { date: None, t }).collect();
    coeffs.slopes = beta.iter().skip(6).copied().collect();
    coeffs.start_date = Some(series.start_date());
    Ok(coeffs)
}

/// Like [`fit_seasonal`] with knots given as calendar dates.
pub fn fit_seasonal_dates(
    series: &PriceSeries,
    knot_dates: &[NaiveDate],
) -> Result<SeasonalCoefficients> {
    let knots: Vec<f64> = knot_dates.iter().map(|&d| series.grid_time_of(d)).collect();
    let mut coeffs = fit_seasonal(series, &knots)?;
    for (k, &d) in coeffs.knots.iter_mut().zip(knot_dates) {
        k.date = Some(d);
    }
    Ok(coeffs)
}

pub fn seasonal_curve(series: &PriceSeries, coeffs: &SeasonalCoefficients) -> Vec<f64> {
    (0..series.len())
        .map(|i| evaluate_f(coeffs, series.time_at(i)))
        .collect()
}

/// `x_i = P_i − f(t_i)`.
pub fn deseasonalize(series: &PriceSeries, coeffs: &SeasonalCoefficients) -> Result<PriceSeries> {
    let values = series
        .values()
        .iter()
        .zip(seasonal_curve(series, coeffs))
        .map(|(p, f)| p - f)
        .collect();
    series.with_values(values)
}

/// `P_i = x_i + f(t_i)`.
pub fn reseasonalize(series: &PriceSeries, coeffs: &SeasonalCoefficients) -> Result<PriceSeries> {
    let values = series
        .values()
        .iter()
        .zip(seasonal_curve(series, coeffs))
        .map(|(x, f)| x + f)
        .collect();
    series.with_values(values)
}

pub fn sum_squared_residuals(series: &PriceSeries, coeffs: &SeasonalCoefficients) -> f64 {
    series
        .values()
        .iter()
        .zip(seasonal_curve(series, coeffs))
        .map(|(p, f)| (p - f).powi(2))
        .sum()
}

/// Coefficient of determination of the fit on `series`.
pub fn r_squared(series: &PriceSeries, coeffs: &SeasonalCoefficients) -> f64 {
    let n = series.len() as f64;
    let mean = series.values().iter().sum::<f64>() / n;
    let tss: f64 = series.values().iter().map(|p| (p - mean).powi(2)).sum();
    if tss == 0.0 {
        return 1.0;
    }
    1.0 - sum_squared_residuals(series, coeffs) / tss
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, 9, 30).unwrap()
    }

    fn series_from(coeffs: &SeasonalCoefficients, n: usize) -> PriceSeries {
        let dt = crate::series::DAILY_DT;
        PriceSeries::new(start(), (0..n).map(|i| evaluate_f(coeffs, i as f64 * dt)).collect())
            .unwrap()
    }

    #[test]
    fn evaluate_simple_cases() {
        let zero = SeasonalCoefficients::zero();
        let level = SeasonalCoefficients::harmonic([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let sine = SeasonalCoefficients::harmonic([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        for t in [0.0, 0.3, 1.7, 4.2] {
            assert_eq!(evaluate_f(&zero, t), 0.0);
            assert_eq!(evaluate_f(&level, t), 1.0);
        }
        assert_abs_diff_eq!(evaluate_f(&sine, 0.25), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn recovers_exact_harmonic_coefficients() {
        let truth = SeasonalCoefficients::harmonic([10.0, 2.0, 1.0, -1.0, 0.5, 0.0]);
        let s = series_from(&truth, 400);
        let fit = fit_seasonal(&s, &[]).unwrap();
        for (a, b) in fit.base().iter().zip(truth.base()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn recovers_hinge_slope() {
        let truth = SeasonalCoefficients::harmonic([40.0, 5.0, 3.0, -2.0, 1.0, 0.5])
            .with_hinges(&[1.5], &[80.0]);
        let s = series_from(&truth, 900);
        let fit = fit_seasonal(&s, &[1.5]).unwrap();
        assert_abs_diff_eq!(fit.slopes[0], 80.0, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.a2, 5.0, epsilon = 1e-8);
        assert_eq!(fit.segment_slopes().len(), 2);
    }

    fn noisy_series(n: usize, seed: u64) -> PriceSeries {
        let truth = SeasonalCoefficients::harmonic([50.0, -3.0, 8.0, 2.0, -1.0, 4.0])
            .with_hinges(&[0.8, 1.9], &[30.0, -45.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clean = series_from(&truth, n);
        let values = clean
            .values()
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + e
            })
            .collect();
        clean.with_values(values).unwrap()
    }

    #[test]
    fn residual_mean_vanishes_with_intercept() {
        let s = noisy_series(1000, 1);
        let fit = fit_seasonal(&s, &[]).unwrap();
        let x = deseasonalize(&s, &fit).unwrap();
        let mean = x.values().iter().sum::<f64>() / x.len() as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn matches_normal_equations() {
        let s = noisy_series(700, 2);
        let knots = [0.8, 1.9];
        let fit = fit_seasonal(&s, &knots).unwrap();
        let x = design_matrix(&s, &knots);
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * DVector::from_column_slice(s.values());
        let beta = xtx.cholesky().unwrap().solve(&xty);
        let got: Vec<f64> = fit.base().iter().chain(&fit.slopes).copied().collect();
        for (g, b) in got.iter().zip(beta.iter()) {
            assert_abs_diff_eq!(*g, *b, epsilon = 1e-8);
        }
    }

    #[test]
    fn fit_is_least_squares_optimal() {
        let s = noisy_series(600, 3);
        let knots = [0.8];
        let fit = fit_seasonal(&s, &knots).unwrap();
        let base = sum_squared_residuals(&s, &fit);
        for j in 0..7 {
            for h in [-1e-3, 1e-3] {
                let mut c = fit.clone();
                match j {
                    0 => c.a1 += h,
                    1 => c.a2 += h,
                    2 => c.a3 += h,
                    3 => c.a4 += h,
                    4 => c.a5 += h,
                    5 => c.a6 += h,
                    _ => c.slopes[0] += h,
                }
                assert!(sum_squared_residuals(&s, &c) >= base);
            }
        }
    }

    #[test]
    fn continuous_at_knots() {
        let c = SeasonalCoefficients::harmonic([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .with_hinges(&[0.7, 1.3], &[100.0, -250.0]);
        for k in [0.7, 1.3] {
            let left = evaluate_f(&c, k - 1e-15);
            let right = evaluate_f(&c, k + 1e-15);
            assert!((left - right).abs() < 1e-12);
        }
    }

    #[test]
    fn deseasonalize_exact_and_identity() {
        let truth = SeasonalCoefficients::harmonic([10.0, 2.0, 1.0, -1.0, 0.5, 0.0]);
        let s = series_from(&truth, 50);
        assert!(deseasonalize(&s, &truth).unwrap().values().iter().all(|&v| v == 0.0));
        assert_eq!(deseasonalize(&s, &SeasonalCoefficients::zero()).unwrap(), s);
    }

    #[test]
    fn segment_means_near_zero_with_matching_knots() {
        let s = noisy_series(1200, 4);
        let knots = [0.8, 1.9];
        let fit = fit_seasonal(&s, &knots).unwrap();
        let x = deseasonalize(&s, &fit).unwrap();
        let cuts = [0, (0.8 * 365.0) as usize, (1.9 * 365.0) as usize, x.len()];
        for w in cuts.windows(2) {
            let seg = &x.values()[w[0]..w[1]];
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            assert!(mean.abs() < 0.3, "segment mean {mean}");
        }
    }

    #[test]
    fn errors() {
        let s = series_from(&SeasonalCoefficients::zero(), 6);
        assert!(matches!(fit_seasonal(&s, &[]), Err(Error::Domain(_))));
        let s = series_from(&SeasonalCoefficients::zero(), 100);
        assert!(matches!(fit_seasonal(&s, &[0.0]), Err(Error::Domain(_))));
        assert!(matches!(fit_seasonal(&s, &[0.2, 0.1]), Err(Error::Domain(_))));
        // two knots in the same grid cell produce identical columns on the grid
        assert!(matches!(
            fit_seasonal(&s, &[0.1, 0.1 + 1e-13]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn json_shape() {
        let s = noisy_series(500, 5);
        let d = start() + chrono::Duration::days(300);
        let fit = fit_seasonal_dates(&s, &[d]).unwrap();
        let json = serde_json::to_value(&fit).unwrap();
        for key in ["a1", "a2", "a3", "a4", "a5", "a6", "knots", "slopes"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["knots"][0]["date"], "2019-07-27");
        let back: SeasonalCoefficients = serde_json::from_value(json).unwrap();
        assert_eq!(back, fit);
    }

    proptest::proptest! {
        #[test]
        fn reseasonalize_inverts_deseasonalize(
            values in proptest::collection::vec(-1e3f64..1e3, 2..100),
            a in proptest::array::uniform6(-100.0f64..100.0),
        ) {
            let s = PriceSeries::new(start(), values).unwrap();
            let c = SeasonalCoefficients::harmonic(a).with_hinges(&[0.05], &[12.0]);
            let back = reseasonalize(&deseasonalize(&s, &c).unwrap(), &c).unwrap();
            for (x, y) in back.values().iter().zip(s.values()) {
                proptest::prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
