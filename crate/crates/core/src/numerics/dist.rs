//! Logit transforms and the few distribution functions the tests need.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::{Error, Result};

pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("logit requires 0 < p < 1, got {p}")));
    }
    Ok((p / (1.0 - p)).ln())
}

pub fn invlogit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile requires 0 < p < 1, got {p}")));
    }
    Ok(std_normal().inverse_cdf(p))
}

/// Upper tail `P(Z > x)` of the standard normal.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn students_t(df: f64) -> Result<StudentsT> {
    if !(df >= 1.0) || !df.is_finite() {
        return Err(Error::Domain(format!("t distribution requires df >= 1, got {df}")));
    }
    StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Domain(e.to_string()))
}

/// Upper tail `P(T > x)` of Student's t with `df` degrees of freedom.
pub fn t_sf(x: f64, df: f64) -> Result<f64> {
    Ok(students_t(df)?.sf(x))
}

pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("t quantile requires 0 < p < 1, got {p}")));
    }
    Ok(students_t(df)?.inverse_cdf(p))
}

/// Upper tail of the χ² distribution. For two degrees of freedom this is
/// exactly `exp(-x/2)`.
pub fn chisq_sf(x: f64, df: f64) -> Result<f64> {
    if !(df >= 1.0) || !df.is_finite() {
        return Err(Error::Domain(format!("chi-square requires df >= 1, got {df}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("chi-square tail requires x >= 0, got {x}")));
    }
    if df == 2.0 {
        return Ok((-x / 2.0).exp());
    }
    let d = ChiSquared::new(df).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(d.sf(x))
}

pub fn chisq_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "chi-square quantile requires 0 < p < 1, got {p}"
        )));
    }
    if !(df >= 1.0) || !df.is_finite() {
        return Err(Error::Domain(format!("chi-square requires df >= 1, got {df}")));
    }
    if df == 2.0 {
        return Ok(-2.0 * (1.0 - p).ln());
    }
    let d = ChiSquared::new(df).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(d.inverse_cdf(p))
}
