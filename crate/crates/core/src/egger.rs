//! Univariate funnel-plot machinery: REML random-effects fit for the
//! funnel center and the Egger regression test (weighted regression with
//! multiplicative dispersion, standard error as predictor).

use serde::{Deserialize, Serialize};

use crate::numerics::{norm_quantile, t_quantile, t_sf, Mat2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniFit {
    pub mu: f64,
    pub tau2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EggerResult {
    pub slope: f64,
    /// Intercept: the predicted effect as the standard error goes to zero.
    pub limit_b: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub ci_lb: f64,
    pub ci_ub: f64,
    pub phi: f64,
}

fn check_inputs(y: &[f64], v: &[f64], min_n: usize) -> Result<()> {
    if y.len() != v.len() {
        return Err(Error::Domain(format!(
            "effect and variance vectors differ in length ({} vs {})",
            y.len(),
            v.len()
        )));
    }
    if y.len() < min_n {
        return Err(Error::InsufficientData {
            needed: min_n,
            got: y.len(),
        });
    }
    if let Some(bad) = v.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!("sampling variances must be positive, got {bad}")));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("effects must be finite".into()));
    }
    Ok(())
}

fn weighted_mean(y: &[f64], v: &[f64], tau2: f64) -> (f64, f64) {
    let (sw, swy) = y.iter().zip(v).fold((0.0, 0.0), |(sw, swy), (&yi, &vi)| {
        let w = 1.0 / (vi + tau2);
        (sw + w, swy + w * yi)
    });
    (swy / sw, sw)
}

/// Univariate restricted log-likelihood up to an additive constant.
pub fn uni_reml_loglik(y: &[f64], v: &[f64], tau2: f64) -> f64 {
    let (mu, sw) = weighted_mean(y, v, tau2);
    let mut acc = sw.ln();
    for (&yi, &vi) in y.iter().zip(v) {
        let total = vi + tau2;
        acc += total.ln() + (yi - mu).powi(2) / total;
    }
    -0.5 * acc
}

pub fn uni_reml_fit(y: &[f64], v: &[f64]) -> Result<UniFit> {
    check_inputs(y, v, 2)?;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var_y = y.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);

    let mut tau2 = 0.0;
    if var_y > 0.0 {
        // golden-section search for the maximum on [0, 10·var(y)]
        let invphi = (5f64.sqrt() - 1.0) / 2.0;
        let f = |t: f64| -uni_reml_loglik(y, v, t);
        let (mut a, mut b) = (0.0, 10.0 * var_y);
        let mut c = b - invphi * (b - a);
        let mut d = a + invphi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 1e-10 * (1.0 + b) {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                fd = f(d);
            }
        }
        let mid = 0.5 * (a + b);
        tau2 = if f(0.0) <= f(mid) { 0.0 } else { mid };
    }
    let (mu, _) = weighted_mean(y, v, tau2);
    Ok(UniFit { mu, tau2 })
}

/// Egger regression: weighted least squares of `y` on `(1, √v)` with
/// weights `1/v`, residual dispersion estimated, t test on the slope.
pub fn egger_test(y: &[f64], v: &[f64]) -> Result<EggerResult> {
    check_inputs(y, v, 3)?;
    let n = y.len();
    let mut xtwx = Mat2::zeros();
    let mut xtwy = [0.0; 2];
    let mut ytwy = 0.0;
    for (&yi, &vi) in y.iter().zip(v) {
        let (w, se) = (1.0 / vi, vi.sqrt());
        xtwx = xtwx + Mat2::symmetric(w, w * se, w * se * se);
        xtwy[0] += w * yi;
        xtwy[1] += w * se * yi;
        ytwy += w * yi * yi;
    }
    if xtwx.det() <= 1e-12 * xtwx.a11 * xtwx.a22 {
        return Err(Error::Test(
            "standard errors are all equal; the Egger regression is not identifiable".into(),
        ));
    }
    let xtwx_inv = xtwx.inv()?;
    let coef = xtwx_inv.mul_vec(xtwy);
    let rss: f64 = y
        .iter()
        .zip(v)
        .map(|(&yi, &vi)| (yi - coef[0] - coef[1] * vi.sqrt()).powi(2) / vi)
        .sum();
    let df = n - 2;
    let phi = rss / df as f64;
    if rss <= 1e-24 * ytwy.max(f64::MIN_POSITIVE) {
        return Err(Error::Test(
            "effects lie exactly on a line in the standard error; t statistic is undefined".into(),
        ));
    }
    let cov = xtwx_inv.scale(phi);
    let t = coef[1] / cov.a22.sqrt();
    let p = 2.0 * t_sf(t.abs(), df as f64)?;
    let q = t_quantile(0.975, df as f64)?;
    let se_b = cov.a11.sqrt();
    Ok(EggerResult {
        slope: coef[1],
        limit_b: coef[0],
        t,
        df,
        p,
        ci_lb: coef[0] - q * se_b,
        ci_ub: coef[0] + q * se_b,
        phi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelSeries {
    /// (effect, standard error) per study.
    pub points: Vec<(f64, f64)>,
    pub center: f64,
    /// (se, lower, upper) of the pseudo 95% confidence contour, se from 0 upward.
    pub contour: Vec<(f64, f64, f64)>,
    pub se_max: f64,
}

pub fn funnel_series(y: &[f64], v: &[f64], fit: &UniFit) -> Result<FunnelSeries> {
    check_inputs(y, v, 1)?;
    let z = norm_quantile(0.975)?;
    let points: Vec<(f64, f64)> = y.iter().zip(v).map(|(&yi, &vi)| (yi, vi.sqrt())).collect();
    let se_max = points.iter().map(|p| p.1).fold(0.0, f64::max);
    // a little headroom above the largest standard error
    let top = se_max * 1.05;
    let steps = 50;
    let contour = (0..=steps)
        .map(|k| {
            let se = top * k as f64 / steps as f64;
            (se, fit.mu - z * se, fit.mu + z * se)
        })
        .collect();
    Ok(FunnelSeries {
        points,
        center: fit.mu,
        contour,
        se_max: top,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equal_effects_have_no_heterogeneity() {
        let fit = uni_reml_fit(&[0.4, 0.4, 0.4], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(fit.tau2, 0.0);
        assert_abs_diff_eq!(fit.mu, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn two_symmetric_studies() {
        let fit = uni_reml_fit(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(fit.mu, 1.0, epsilon = 1e-12);
        // REML solution for two equal-variance studies: τ² = (Δ²/2) − v = 1
        assert_abs_diff_eq!(fit.tau2, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn insufficient_and_invalid() {
        assert!(matches!(
            uni_reml_fit(&[1.0], &[1.0]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            egger_test(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(uni_reml_fit(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(egger_test(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_se_is_singular() {
        assert!(matches!(
            egger_test(&[0.1, 0.5, 0.2, 0.9], &[0.2; 4]),
            Err(Error::Test(_))
        ));
    }

    #[test]
    fn collinear_data_is_undefined() {
        let v = [0.04, 0.09, 0.16, 0.25];
        let y: Vec<f64> = v.iter().map(|x: &f64| 0.3 + 2.0 * x.sqrt()).collect();
        assert!(matches!(egger_test(&y, &v), Err(Error::Test(_))));
    }

    #[test]
    fn matches_ordinary_wls_by_hand() {
        // Three points make the weighted normal equations easy to check.
        let y = [0.2, 0.5, 1.1];
        let v = [0.01, 0.04, 0.09];
        let r = egger_test(&y, &v).unwrap();
        assert_eq!(r.df, 1);
        // independent 3x2 normal equations solved with nalgebra
        let x = nalgebra::DMatrix::from_row_slice(3, 2, &[1.0, 0.1, 1.0, 0.2, 1.0, 0.3]);
        let w = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v.iter().map(|x| 1.0 / x).collect()));
        let yv = nalgebra::DVector::from_row_slice(&y);
        let xtwx = x.transpose() * &w * &x;
        let beta = xtwx.clone().try_inverse().unwrap() * x.transpose() * &w * &yv;
        assert_abs_diff_eq!(r.limit_b, beta[0], epsilon = 1e-10);
        assert_abs_diff_eq!(r.slope, beta[1], epsilon = 1e-10);
        assert!(r.ci_lb < r.limit_b && r.limit_b < r.ci_ub);
        assert_abs_diff_eq!(r.p, 2.0 * t_sf(r.t.abs(), 1.0).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn funnel_geometry() {
        let fit = UniFit { mu: 0.3, tau2: 0.0 };
        let s = funnel_series(&[0.3], &[0.01], &fit).unwrap();
        assert_eq!(s.points, vec![(0.3, 0.1)]);
        assert_eq!(s.center, 0.3);
        let s = funnel_series(&[0.0, 1.0], &[1.0, 0.25], &UniFit { mu: 0.5, tau2: 0.0 }).unwrap();
        let (se, lo, hi) = s.contour.iter().copied().find(|c| (c.0 - 1.05).abs() < 1e-12).unwrap();
        assert_abs_diff_eq!(hi - lo, 2.0 * 1.959963984540054 * se, epsilon = 1e-12);
        let at_one = 2.0 * norm_quantile(0.975).unwrap() * 1.0;
        assert_abs_diff_eq!(at_one, 3.919927969080108, epsilon = 1e-12);
        assert_eq!(s.contour[0], (0.0, 0.5, 0.5));
    }
}
