//! SROC curve derived from a bivariate fit through the equivalent
//! hierarchical (Rutter–Gatsonis) parameterization.

use serde::{Deserialize, Serialize};

use crate::bivariate::BivariateFit;
use crate::numerics::{chisq_quantile, invlogit, logit, Mat2, Vec2};
use crate::{Error, Result};

pub const DEFAULT_GRID: usize = 5000;
pub const ELLIPSE_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsrocParams {
    /// Accuracy.
    pub lambda: f64,
    /// Asymmetry (shape); `exp(beta) = sd_fpr / sd_sens`.
    pub beta: f64,
    /// Positivity threshold.
    pub theta: f64,
    pub tau_theta2: f64,
    pub tau_alpha2: f64,
}

/// Maps pooled means and between-study covariance on the
/// (logit Se, logit FPR) scale to HSROC parameters.
pub fn hsroc_from_bivariate(mu: Vec2, sigma: &Mat2) -> Result<HsrocParams> {
    let (sd1, sd2) = (sigma.a11.sqrt(), sigma.a22.sqrt());
    if !(sd1 > 0.0 && sd2 > 0.0) {
        return Err(Error::Fit(
            "degenerate fit: a between-study SD is zero (boundary estimate), SROC curve is undefined".into(),
        ));
    }
    let beta = (sd2 / sd1).ln();
    let half = (beta / 2.0).exp();
    let cross = sd1 * sd2;
    Ok(HsrocParams {
        lambda: mu[0] * half - mu[1] / half,
        beta,
        theta: 0.5 * (mu[0] * half + mu[1] / half),
        tau_theta2: 0.5 * (cross + sigma.a12),
        tau_alpha2: 2.0 * (cross - sigma.a12),
    })
}

pub fn map_hsroc(fit: &BivariateFit) -> Result<HsrocParams> {
    hsroc_from_bivariate(fit.mu, &fit.sigma)
}

impl HsrocParams {
    /// Inverse mapping back to `(μ, Σ)`.
    pub fn to_bivariate(&self) -> (Vec2, Mat2) {
        let half = (self.beta / 2.0).exp();
        let mu = [
            (self.theta + self.lambda / 2.0) / half,
            (self.theta - self.lambda / 2.0) * half,
        ];
        let total = self.tau_theta2 + self.tau_alpha2 / 4.0;
        let cov = self.tau_theta2 - self.tau_alpha2 / 4.0;
        let e = self.beta.exp();
        (mu, Mat2::symmetric(total / e, cov, total * e))
    }
}

/// Sensitivity on the SROC curve at false positive rate `fpr` in (0, 1).
pub fn sroc_sens(fpr: f64, p: &HsrocParams) -> f64 {
    let x = match logit(fpr) {
        Ok(x) => x,
        Err(_) if fpr <= 0.0 => return 0.0,
        Err(_) => return 1.0,
    };
    invlogit(p.lambda * (-p.beta / 2.0).exp() + (-p.beta).exp() * x)
}

/// Midpoint-rule integral of the curve over `[lo, hi]` with `grid` cells.
/// Cell midpoints never touch 0 or 1, where the logit is singular.
fn integrate(p: &HsrocParams, lo: f64, hi: f64, grid: usize) -> f64 {
    let h = (hi - lo) / grid as f64;
    (0..grid).map(|k| sroc_sens(lo + (k as f64 + 0.5) * h, p)).sum::<f64>() * h
}

pub fn auc(p: &HsrocParams, grid: usize) -> Result<f64> {
    if grid == 0 {
        return Err(Error::Domain("integration grid must have at least one cell".into()));
    }
    Ok(integrate(p, 0.0, 1.0, grid))
}

/// Area under the curve over `[fpr_lo, fpr_hi]`, divided by the width.
pub fn partial_auc(p: &HsrocParams, fpr_lo: f64, fpr_hi: f64, grid: usize) -> Result<f64> {
    if !(0.0 <= fpr_lo && fpr_lo < fpr_hi && fpr_hi <= 1.0) {
        return Err(Error::Domain(format!(
            "partial AUC needs 0 <= lo < hi <= 1, got [{fpr_lo}, {fpr_hi}]"
        )));
    }
    if grid == 0 {
        return Err(Error::Domain("integration grid must have at least one cell".into()));
    }
    Ok(integrate(p, fpr_lo, fpr_hi, grid) / (fpr_hi - fpr_lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrocCurve {
    pub params: HsrocParams,
    /// (fpr, sens) pairs, increasing in fpr.
    pub grid: Vec<(f64, f64)>,
    pub auc: f64,
    pub pauc: f64,
    pub fpr_range: (f64, f64),
}

/// Builds the curve, AUC and partial AUC over the observed FPR range.
/// `points` controls the plotted grid; `grid` the integration cells.
pub fn sroc_curve(fit: &BivariateFit, observed_fpr: &[f64], grid: usize, points: usize) -> Result<SrocCurve> {
    let params = map_hsroc(fit)?;
    let lo = observed_fpr.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = observed_fpr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain("no observed false positive rates".into()));
    }
    let points = points.max(2);
    let curve = (0..points)
        .map(|k| {
            let fpr = (k as f64 + 0.5) / points as f64;
            (fpr, sroc_sens(fpr, &params))
        })
        .collect();
    Ok(SrocCurve {
        params,
        grid: curve,
        auc: auc(&params, grid)?,
        pauc: partial_auc(&params, lo, hi, grid)?,
        fpr_range: (lo, hi),
    })
}

/// Ellipse `center + r·L·(cos t, sin t)` in logit space, with `r² ` the
/// χ²₂ quantile at `level` and `L` the Cholesky-type factor of `cov`.
/// Returned as (logit Se, logit FPR) pairs.
pub fn logit_ellipse(center: Vec2, cov: &Mat2, level: f64, points: usize) -> Result<Vec<Vec2>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let radius = chisq_quantile(level, 2.0)?.sqrt();
    let l = cov.psd_factor()?;
    Ok((0..points)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
            let d = l.mul_vec([radius * t.cos(), radius * t.sin()]);
            [center[0] + d[0], center[1] + d[1]]
        })
        .collect())
}

fn to_roc_space(points: Vec<Vec2>) -> Vec<(f64, f64)> {
    points.into_iter().map(|p| (invlogit(p[1]), invlogit(p[0]))).collect()
}

/// Confidence region for the summary point, as (fpr, sens) pairs.
pub fn confidence_region(fit: &BivariateFit, level: f64) -> Result<Vec<(f64, f64)>> {
    Ok(to_roc_space(logit_ellipse(fit.mu, &fit.cov_mu, level, ELLIPSE_POINTS)?))
}

/// Prediction region for a new study, as (fpr, sens) pairs.
pub fn prediction_region(fit: &BivariateFit, level: f64) -> Result<Vec<(f64, f64)>> {
    Ok(to_roc_space(logit_ellipse(
        fit.mu,
        &(fit.cov_mu + fit.sigma),
        level,
        ELLIPSE_POINTS,
    )?))
}
