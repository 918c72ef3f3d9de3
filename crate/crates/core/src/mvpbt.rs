//! Generalized Egger tests for the bivariate model.
//!
//! Under the null both funnel plots are symmetric: `E[y_ij] = μ_j`. The
//! alternative adds a small-study slope per outcome,
//! `E[y_ij] = β0j + βj·s_ij`, with `s_ij` the study's standard error for
//! outcome j. With the between-study covariance fixed at its REML estimate
//! under the null, the efficient score statistic for `β1 = β2 = 0` is the
//! GLS quadratic form of the two slope estimates (score and Wald coincide
//! in a Gaussian linear model with known covariance), referred to χ²₂.
//!
//! The bootstrap version regenerates outcome vectors from the fitted null
//! model, refits Σ for every replicate, and uses the empirical distribution
//! of the statistic instead of χ²₂.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bivariate::{fit_reitsma, BivariateFit, FitOptions};
use crate::ingest::TransformedStudy;
use crate::numerics::{chisq_sf, mvn2_sample, Mat2, RngStream, Vec2};
use crate::{Error, Result};

pub const MIN_STUDIES: usize = 4;
pub const MIN_BOOTSTRAP: usize = 100;
pub const DEFAULT_BOOTSTRAP: usize = 2000;

/// Smallest admissible eigenvalue of the unit-diagonal-scaled information
/// matrix of the extended mean model.
const DESIGN_RANK_TOL: f64 = 1e-10;

/// Which standard error enters the extended mean model as the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SeCovariate {
    /// `sqrt(S_i,jj)`: within-study standard error.
    #[default]
    Within,
    /// `sqrt(S_i,jj + Σ_jj)`: total (marginal) standard error.
    Total,
}

impl FromStr for SeCovariate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "within" => Ok(Self::Within),
            "total" => Ok(Self::Total),
            other => Err(Error::Domain(format!(
                "unknown SE covariate '{other}' (expected within or total)"
            ))),
        }
    }
}

impl fmt::Display for SeCovariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Within => "within",
            Self::Total => "total",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TestOptions {
    pub fit: FitOptions,
    pub covariate: SeCovariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Msset2,
    Msset3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PBTestResult {
    pub method: Method,
    /// Observed score statistic.
    pub t: f64,
    pub p: f64,
    /// Pooled means of the null model (logit Se, logit FPR).
    pub b0: Vec2,
    pub boot_stats: Option<Vec<f64>>,
    pub b: usize,
    pub seed: u64,
    pub n_failed: usize,
    pub covariate: SeCovariate,
    pub warnings: Vec<String>,
}

/// GLS fit of the extended (intercept + slope per outcome) mean model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreStatistic {
    pub t: f64,
    /// `(β01, β1, β02, β2)`
    pub coef: [f64; 4],
    pub cov: [[f64; 4]; 4],
}

pub fn se_covariates(studies: &[TransformedStudy], sigma: &Mat2, kind: SeCovariate) -> Vec<Vec2> {
    studies
        .iter()
        .map(|st| match kind {
            SeCovariate::Within => st.se,
            SeCovariate::Total => [(st.s.a11 + sigma.a11).sqrt(), (st.s.a22 + sigma.a22).sqrt()],
        })
        .collect()
}

fn to_na(m: &Mat2) -> Matrix2<f64> {
    Matrix2::new(m.a11, m.a12, m.a21, m.a22)
}

/// Score statistic for `β1 = β2 = 0` with weights `(S_i + sigma)⁻¹` held fixed.
pub fn score_statistic(studies: &[TransformedStudy], sigma: &Mat2, covariates: &[Vec2]) -> Result<ScoreStatistic> {
    if studies.len() != covariates.len() {
        return Err(Error::Domain("one covariate pair is needed per study".into()));
    }
    let mut info = Matrix4::<f64>::zeros();
    let mut rhs = Vector4::<f64>::zeros();
    for (st, s) in studies.iter().zip(covariates) {
        let w = to_na(&(st.s + *sigma).inv()?);
        #[rustfmt::skip]
        let x = nalgebra::Matrix2x4::new(
            1.0, s[0], 0.0, 0.0,
            0.0, 0.0, 1.0, s[1],
        );
        let xtw = x.transpose() * w;
        info += xtw * x;
        rhs += xtw * Vector2::new(st.y[0], st.y[1]);
    }

    let scale = Vector4::from_iterator(info.diagonal().iter().map(|d| 1.0 / d.sqrt()));
    if scale.iter().any(|s| !s.is_finite()) {
        return Err(Error::Test("extended design has a zero column".into()));
    }
    let scaled = Matrix4::from_fn(|i, j| info[(i, j)] * scale[i] * scale[j]);
    let min_eig = SymmetricEigen::new(scaled).eigenvalues.min();
    if !(min_eig > DESIGN_RANK_TOL) {
        return Err(Error::Test(
            "extended design is singular (standard errors constant within an outcome?)".into(),
        ));
    }
    let cov = info
        .cholesky()
        .ok_or_else(|| Error::Test("extended information matrix is not positive definite".into()))?
        .inverse();
    let coef = cov * rhs;
    let slopes = Vector2::new(coef[1], coef[3]);
    let cov_slopes = Matrix2::new(cov[(1, 1)], cov[(1, 3)], cov[(3, 1)], cov[(3, 3)]);
    let inv = cov_slopes
        .try_inverse()
        .ok_or_else(|| Error::Test("slope covariance is singular".into()))?;
    let t = (slopes.transpose() * inv * slopes)[0].max(0.0);
    Ok(ScoreStatistic {
        t,
        coef: [coef[0], coef[1], coef[2], coef[3]],
        cov: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])),
    })
}

fn check_size(studies: &[TransformedStudy]) -> Result<()> {
    if studies.len() < MIN_STUDIES {
        return Err(Error::InsufficientData {
            needed: MIN_STUDIES,
            got: studies.len(),
        });
    }
    Ok(())
}

fn null_fit(studies: &[TransformedStudy], options: &TestOptions) -> Result<BivariateFit> {
    let fit = fit_reitsma(studies, &options.fit)?;
    if !fit.converged {
        return Err(Error::Fit("REML fit of the null model did not converge".into()));
    }
    Ok(fit)
}

/// Statistic for given studies against an already fitted null model.
pub fn statistic_given_fit(studies: &[TransformedStudy], fit: &BivariateFit, covariate: SeCovariate) -> Result<f64> {
    let s = se_covariates(studies, &fit.sigma, covariate);
    Ok(score_statistic(studies, &fit.sigma, &s)?.t)
}

/// Efficient score test with the χ²₂ reference distribution.
pub fn msset2(studies: &[TransformedStudy], options: &TestOptions) -> Result<PBTestResult> {
    check_size(studies)?;
    let fit = null_fit(studies, options)?;
    let t = statistic_given_fit(studies, &fit, options.covariate)?;
    Ok(PBTestResult {
        method: Method::Msset2,
        t,
        p: chisq_sf(t, 2.0)?,
        b0: fit.mu,
        boot_stats: None,
        b: 0,
        seed: 0,
        n_failed: 0,
        covariate: options.covariate,
        warnings: Vec::new(),
    })
}

/// One parametric bootstrap draw of the statistic under the fitted null.
pub fn bootstrap_replicate(
    fit: &BivariateFit,
    studies: &[TransformedStudy],
    rng: &mut RngStream,
    options: &TestOptions,
) -> Result<f64> {
    let synthetic = studies
        .iter()
        .map(|st| Ok(st.with_y(mvn2_sample(fit.mu, &(st.s + fit.sigma), rng)?)))
        .collect::<Result<Vec<_>>>()?;
    let refit = null_fit(&synthetic, options)?;
    let t = statistic_given_fit(&synthetic, &refit, options.covariate)?;
    if !t.is_finite() {
        return Err(Error::Test("non-finite bootstrap statistic".into()));
    }
    Ok(t)
}

/// `(#{T* ≥ T} + 1) / (B_eff + 1)`
pub fn bootstrap_p_value(t_obs: f64, boot_stats: &[f64]) -> f64 {
    let exceed = boot_stats.iter().filter(|&&t| t >= t_obs).count();
    (exceed + 1) as f64 / (boot_stats.len() + 1) as f64
}

/// Parametric bootstrap version of [`msset2`]. Replicate `k` draws from
/// stream `k` of the master seed, so results do not depend on scheduling.
pub fn msset3(studies: &[TransformedStudy], b: usize, seed: u64, options: &TestOptions) -> Result<PBTestResult> {
    if b < MIN_BOOTSTRAP {
        return Err(Error::Domain(format!(
            "number of bootstrap replicates must be at least {MIN_BOOTSTRAP}, got {b}"
        )));
    }
    check_size(studies)?;
    let fit = null_fit(studies, options)?;
    let t = statistic_given_fit(studies, &fit, options.covariate)?;

    let draws: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::new(seed, k as u64);
            bootstrap_replicate(&fit, studies, &mut rng, options).ok()
        })
        .collect();
    let boot_stats: Vec<f64> = draws.iter().flatten().copied().collect();
    let n_failed = b - boot_stats.len();
    if boot_stats.is_empty() {
        return Err(Error::Test("every bootstrap replicate failed".into()));
    }
    let mut warnings = Vec::new();
    if n_failed as f64 > 0.01 * b as f64 {
        warnings.push(format!(
            "{n_failed} of {b} bootstrap replicates failed and were dropped"
        ));
    }
    Ok(PBTestResult {
        method: Method::Msset3,
        t,
        p: bootstrap_p_value(t, &boot_stats),
        b0: fit.mu,
        boot_stats: Some(boot_stats),
        b,
        seed,
        n_failed,
        covariate: options.covariate,
        warnings,
    })
}
