//! Diagnostic-test-accuracy meta-analysis.
//!
//! Per-study 2×2 tables are turned into logit-scale outcome pairs
//! (logit sensitivity, logit false positive rate) with within-study
//! covariance, pooled with the bivariate random-effects model fitted by
//! REML, summarized by an SROC curve, and checked for small-study effects
//! with univariate Egger regressions and the bivariate efficient score
//! test (plus its parametric bootstrap calibration).
//!
//! Modules are layered bottom-up:
//!
//! - [`numerics`]: 2×2 algebra, distribution functions, Nelder–Mead, RNG streams
//! - [`ingest`]: CSV parsing, continuity correction, logit transform
//! - [`bivariate`]: GLS profile, REML likelihood, model fit
//! - [`sroc`]: HSROC mapping, SROC curve, AUC, confidence/prediction regions
//! - [`egger`]: univariate REML fit, Egger regression test, funnel series
//! - [`mvpbt`]: bivariate score test and its parametric bootstrap

// Guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bivariate;
pub mod egger;
mod error;
pub mod ingest;
pub mod mvpbt;
pub mod numerics;
pub mod sroc;

pub use error::{Error, Result};
