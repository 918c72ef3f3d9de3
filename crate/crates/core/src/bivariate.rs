//! Bivariate random-effects model for (logit sensitivity, logit FPR):
//! `y_i ~ N₂(μ, S_i + Σ)`, with Σ estimated by REML and μ by GLS.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::TransformedStudy;
use crate::numerics::{invlogit, norm_quantile, norm_sf, Mat2, NelderMead, Vec2};
use crate::{Error, Result};

/// Between-study variances below this are reported as exactly zero.
pub const BOUNDARY_VARIANCE: f64 = 1e-8;

const START_VARIANCE_FLOOR: f64 = 1e-4;

/// Additive constant used in the restricted log-likelihood. The two choices
/// differ by `½·ln det(XᵀX) = ln N` for the intercept-only bivariate design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LoglikConvention {
    /// `-½[Σ ln|V_i| + ln|Σ V_i⁻¹| + Σ r_iᵀV_i⁻¹r_i + (2N−2) ln 2π]`
    #[default]
    Plain,
    /// `Plain` plus `½ ln|XᵀX|`.
    WithDesignTerm,
}

impl std::str::FromStr for LoglikConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "with-design-term" => Ok(Self::WithDesignTerm),
            other => Err(Error::Domain(format!(
                "unknown loglik convention '{other}' (expected plain or with-design-term)"
            ))),
        }
    }
}

impl fmt::Display for LoglikConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Plain => "plain",
            Self::WithDesignTerm => "with-design-term",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlsProfile {
    pub mu: Vec2,
    pub cov_mu: Mat2,
}

/// GLS estimate of the pooled means for a fixed between-study covariance.
pub fn gls_profile(sigma: &Mat2, studies: &[TransformedStudy]) -> Result<GlsProfile> {
    if studies.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut info = Mat2::zeros();
    let mut score = [0.0; 2];
    for st in studies {
        let w = (st.s + *sigma).inv()?;
        info = info + w;
        let wy = w.mul_vec(st.y);
        score[0] += wy[0];
        score[1] += wy[1];
    }
    let cov_mu = info
        .inv()
        .map_err(|e| Error::Fit(format!("summed GLS weights are singular: {e}")))?;
    Ok(GlsProfile {
        mu: cov_mu.mul_vec(score),
        cov_mu,
    })
}

pub fn reml_loglik(sigma: &Mat2, studies: &[TransformedStudy], convention: LoglikConvention) -> Result<f64> {
    if !sigma.is_psd() {
        return Err(Error::Domain(
            "between-study covariance is not positive semidefinite".into(),
        ));
    }
    if studies.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let n = studies.len() as f64;
    let mut info = Mat2::zeros();
    let mut score = [0.0; 2];
    let mut logdet_v = 0.0;
    let mut weights = Vec::with_capacity(studies.len());
    for st in studies {
        let v = st.s + *sigma;
        let w = v.inv()?;
        logdet_v += v.det().ln();
        info = info + w;
        let wy = w.mul_vec(st.y);
        score[0] += wy[0];
        score[1] += wy[1];
        weights.push(w);
    }
    let mu = info.inv()?.mul_vec(score);
    let rss: f64 = studies
        .iter()
        .zip(&weights)
        .map(|(st, w)| w.quad_form([st.y[0] - mu[0], st.y[1] - mu[1]]))
        .sum();
    let plain = -0.5 * (logdet_v + info.det().ln() + rss + (2.0 * n - 2.0) * (2.0 * PI).ln());
    Ok(match convention {
        LoglikConvention::Plain => plain,
        LoglikConvention::WithDesignTerm => plain + n.ln(),
    })
}

/// Maps log-Cholesky coordinates `(ln L11, L21, ln L22)` to `Σ = L·Lᵀ`.
pub fn sigma_from_log_cholesky(theta: &[f64]) -> Mat2 {
    let l11 = theta[0].exp();
    let l21 = theta[1];
    let l22 = theta[2].exp();
    Mat2::symmetric(l11 * l11, l11 * l21, l21 * l21 + l22 * l22)
}

pub fn log_cholesky_from_sigma(sigma: &Mat2) -> Result<[f64; 3]> {
    let l = sigma.chol()?;
    Ok([l.a11.ln(), l.a21, l.a22.ln()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub convention: LoglikConvention,
    pub optimizer: NelderMead,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            convention: LoglikConvention::default(),
            optimizer: NelderMead {
                restarts: 1,
                ..NelderMead::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateFit {
    /// Pooled (logit sensitivity, logit FPR).
    pub mu: Vec2,
    pub cov_mu: Mat2,
    pub sigma: Mat2,
    pub sd: Vec2,
    pub rho: f64,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
    pub converged: bool,
    /// Σ̂ is on the boundary of the parameter space: a between-study
    /// variance estimated at zero, or a correlation of ±1.
    pub boundary: bool,
    pub convention: LoglikConvention,
    pub evaluations: usize,
}

/// Number of free parameters: two means and three covariance components.
pub const N_PARAMS: f64 = 5.0;

impl BivariateFit {
    pub fn se(&self) -> Vec2 {
        [self.cov_mu.a11.sqrt(), self.cov_mu.a22.sqrt()]
    }

    pub fn z(&self) -> Vec2 {
        let se = self.se();
        [self.mu[0] / se[0], self.mu[1] / se[1]]
    }
}

fn sample_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn canonical_order(studies: &[TransformedStudy]) -> Vec<TransformedStudy> {
    let mut sorted = studies.to_vec();
    sorted.sort_by(|a, b| {
        a.s.a11
            .total_cmp(&b.s.a11)
            .then(a.s.a22.total_cmp(&b.s.a22))
            .then(a.y[0].abs().total_cmp(&b.y[0].abs()))
            .then(a.y[1].abs().total_cmp(&b.y[1].abs()))
            .then(a.y[0].total_cmp(&b.y[0]))
            .then(a.y[1].total_cmp(&b.y[1]))
    });
    sorted
}

/// Fits the bivariate model by REML over log-Cholesky coordinates of Σ.
///
/// Studies are processed in a canonical (value-sorted) order so the fit is
/// bit-identical under any permutation of the input, and under negating
/// every outcome vector.
pub fn fit_reitsma(studies: &[TransformedStudy], options: &FitOptions) -> Result<BivariateFit> {
    if studies.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: studies.len(),
        });
    }
    let studies = canonical_order(studies);
    let n = studies.len();

    let start: Vec<f64> = (0..2)
        .map(|j| {
            let var_y = sample_variance(studies.iter().map(|s| s.y[j]));
            let mean_s = studies.iter().map(|s| s.s.diagonal()[j]).sum::<f64>() / n as f64;
            0.5 * (var_y - mean_s).max(START_VARIANCE_FLOOR).ln()
        })
        .collect();
    let x0 = [start[0], 0.0, start[1]];

    let objective = |theta: &[f64]| -> f64 {
        let sigma = sigma_from_log_cholesky(theta);
        reml_loglik(&sigma, &studies, options.convention).map_or(f64::NAN, |l| -l)
    };
    let opt = options.optimizer.minimize(objective, &x0)?;

    let mut sigma = sigma_from_log_cholesky(&opt.x);
    let mut boundary = false;
    if sigma.a11 < BOUNDARY_VARIANCE {
        sigma = Mat2::diag(0.0, sigma.a22);
        boundary = true;
    }
    if sigma.a22 < BOUNDARY_VARIANCE {
        sigma = Mat2::diag(sigma.a11, 0.0);
        boundary = true;
    }
    let sd = [sigma.a11.sqrt(), sigma.a22.sqrt()];
    let rho = if boundary {
        0.0
    } else {
        (sigma.a12 / (sd[0] * sd[1])).clamp(-1.0, 1.0)
    };
    // perfectly correlated random effects: Σ has rank one
    if rho.abs() > 1.0 - BOUNDARY_VARIANCE {
        boundary = true;
    }

    let GlsProfile { mu, cov_mu } = gls_profile(&sigma, &studies)?;
    let loglik = reml_loglik(&sigma, &studies, options.convention)?;
    let data_points = 2.0 * n as f64;
    Ok(BivariateFit {
        mu,
        cov_mu,
        sigma,
        sd,
        rho,
        loglik,
        aic: -2.0 * loglik + 2.0 * N_PARAMS,
        bic: -2.0 * loglik + N_PARAMS * data_points.ln(),
        n,
        converged: opt.converged,
        boundary,
        convention: options.convention,
        evaluations: opt.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    pub ci_lb: f64,
    pub ci_ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub estimate: f64,
    pub ci_lb: f64,
    pub ci_ub: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub tsens: CoefficientRow,
    pub tfpr: CoefficientRow,
    pub sensitivity: Proportion,
    pub fpr: Proportion,
    pub sd: Vec2,
    pub rho: f64,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
    pub converged: bool,
    pub boundary: bool,
}

/// Wald 95% intervals on the logit scale and their back-transforms.
pub fn summarize(fit: &BivariateFit) -> FitSummary {
    let q = norm_quantile(0.975).expect("valid probability");
    let se = fit.se();
    let row = |j: usize| {
        let z = fit.mu[j] / se[j];
        CoefficientRow {
            estimate: fit.mu[j],
            se: se[j],
            z,
            p: 2.0 * norm_sf(z.abs()),
            ci_lb: fit.mu[j] - q * se[j],
            ci_ub: fit.mu[j] + q * se[j],
        }
    };
    let back = |r: &CoefficientRow| Proportion {
        estimate: invlogit(r.estimate),
        ci_lb: invlogit(r.ci_lb),
        ci_ub: invlogit(r.ci_ub),
    };
    let tsens = row(0);
    let tfpr = row(1);
    FitSummary {
        sensitivity: back(&tsens),
        fpr: back(&tfpr),
        tsens,
        tfpr,
        sd: fit.sd,
        rho: fit.rho,
        loglik: fit.loglik,
        aic: fit.aic,
        bic: fit.bic,
        n: fit.n,
        converged: fit.converged,
        boundary: fit.boundary,
    }
}

impl fmt::Display for FitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Bivariate diagnostic random-effects meta-analysis (N = {})", self.n)?;
        writeln!(f, "Estimation method: REML")?;
        writeln!(f)?;
        writeln!(
            f,
            "{:<18}{:>9}{:>11}{:>9}{:>10}{:>10}{:>10}",
            "", "Estimate", "Std. Error", "z", "Pr(>|z|)", "95%ci.lb", "95%ci.ub"
        )?;
        for (name, r) in [("tsens", &self.tsens), ("tfpr", &self.tfpr)] {
            writeln!(
                f,
                "{:<18}{:>9.3}{:>11.3}{:>9.3}{:>10.3}{:>10.3}{:>10.3}",
                name, r.estimate, r.se, r.z, r.p, r.ci_lb, r.ci_ub
            )?;
        }
        for (name, p) in [("sensitivity", &self.sensitivity), ("false pos. rate", &self.fpr)] {
            writeln!(
                f,
                "{:<18}{:>9.3}{:>11}{:>9}{:>10}{:>10.3}{:>10.3}",
                name, p.estimate, "-", "-", "-", p.ci_lb, p.ci_ub
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "Between-study SD: tsens {:.3}, tfpr {:.3}; correlation {:.3}",
            self.sd[0], self.sd[1], self.rho
        )?;
        writeln!(f, "logLik {:.3}  AIC {:.3}  BIC {:.3}", self.loglik, self.aic, self.bic)?;
        if self.boundary {
            writeln!(
                f,
                "note: between-study covariance is on the boundary (zero variance or |correlation| = 1)"
            )?;
        }
        if !self.converged {
            writeln!(f, "warning: optimizer did not converge")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn study(y: Vec2, v: Vec2) -> TransformedStudy {
        TransformedStudy::from_parts("s", y, v).unwrap()
    }

    #[test]
    fn single_study_profile() {
        let s = study([0.3, -1.0], [0.2, 0.4]);
        let sigma = Mat2::symmetric(0.1, 0.02, 0.3);
        let g = gls_profile(&sigma, std::slice::from_ref(&s)).unwrap();
        assert_abs_diff_eq!(g.mu[0], 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(g.mu[1], -1.0, epsilon = 1e-14);
        assert!(g.cov_mu.max_abs_diff(&(s.s + sigma)) < 1e-14);
    }

    #[test]
    fn equal_weights_give_componentwise_mean() {
        let a = study([0.0, -2.0], [0.2, 0.3]);
        let b = study([1.0, -1.0], [0.2, 0.3]);
        let g = gls_profile(&Mat2::symmetric(0.1, -0.05, 0.2), &[a, b]).unwrap();
        assert_abs_diff_eq!(g.mu[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(g.mu[1], -1.5, epsilon = 1e-14);
    }

    #[test]
    fn single_study_loglik_has_zero_residual() {
        let s = study([0.3, -1.0], [0.2, 0.4]);
        let sigma = Mat2::diag(0.1, 0.1);
        let v = s.s + sigma;
        // N = 1: ln|V| + ln|V⁻¹| = 0, residual 0, (2N−2)=0
        let expected = -0.5 * (v.det().ln() + v.inv().unwrap().det().ln());
        let l = reml_loglik(&sigma, &[s], LoglikConvention::Plain).unwrap();
        assert_abs_diff_eq!(l, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn convention_offset_is_log_n() {
        let studies: Vec<_> = (0..5)
            .map(|i| study([0.1 * i as f64, -1.0 + 0.05 * i as f64], [0.2, 0.3]))
            .collect();
        let sigma = Mat2::diag(0.1, 0.2);
        let a = reml_loglik(&sigma, &studies, LoglikConvention::Plain).unwrap();
        let b = reml_loglik(&sigma, &studies, LoglikConvention::WithDesignTerm).unwrap();
        assert_abs_diff_eq!(b - a, 5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn non_psd_sigma_is_domain_error() {
        let s = study([0.0, 0.0], [0.2, 0.2]);
        assert!(matches!(
            reml_loglik(&Mat2::symmetric(1.0, 2.0, 1.0), &[s], LoglikConvention::Plain),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn log_cholesky_roundtrip() {
        let sigma = Mat2::symmetric(0.1, -0.05, 0.5);
        let theta = log_cholesky_from_sigma(&sigma).unwrap();
        assert!(sigma_from_log_cholesky(&theta).max_abs_diff(&sigma) < 1e-15);
    }

    #[test]
    fn needs_two_studies() {
        let s = study([0.0, 0.0], [0.2, 0.2]);
        assert_eq!(
            fit_reitsma(&[s], &FitOptions::default()),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        );
    }

    #[test]
    fn identical_studies_hit_the_boundary() {
        let studies: Vec<_> = (0..6).map(|_| study([0.7, -1.2], [1e-4, 1e-4])).collect();
        let fit = fit_reitsma(&studies, &FitOptions::default()).unwrap();
        assert!(fit.boundary);
        assert_eq!(fit.sigma, Mat2::zeros());
        assert_eq!(fit.rho, 0.0);
        assert_abs_diff_eq!(fit.mu[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.mu[1], -1.2, epsilon = 1e-12);
    }

    #[test]
    fn information_criteria() {
        let studies: Vec<_> = (0..8)
            .map(|i| {
                let t = i as f64;
                study(
                    [0.5 + 0.3 * (t * 1.7).sin(), -1.4 + 0.5 * (t * 2.3).cos()],
                    [0.1 + 0.02 * t, 0.15],
                )
            })
            .collect();
        let fit = fit_reitsma(&studies, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.aic - (-2.0 * fit.loglik), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.bic, -2.0 * fit.loglik + 5.0 * 16f64.ln(), epsilon = 1e-12);
        assert!(fit.sigma.is_psd());
    }

    #[test]
    fn summary_of_unit_covariance() {
        let fit = BivariateFit {
            mu: [0.0, 0.0],
            cov_mu: Mat2::identity(),
            sigma: Mat2::zeros(),
            sd: [0.0, 0.0],
            rho: 0.0,
            loglik: 0.0,
            aic: 10.0,
            bic: 0.0,
            n: 3,
            converged: true,
            boundary: true,
            convention: LoglikConvention::Plain,
            evaluations: 0,
        };
        let s = summarize(&fit);
        assert_eq!(s.sensitivity.estimate, 0.5);
        // invlogit(±1.959964)
        assert_abs_diff_eq!(s.sensitivity.ci_lb, 0.12347094531688808, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sensitivity.ci_ub, 0.8765290546831119, epsilon = 1e-12);
        assert_eq!(s.tsens.p, 1.0);
        assert!(s.to_string().contains("REML"));
    }
}
