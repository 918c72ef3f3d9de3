use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dta_core::bivariate::LoglikConvention;
use dta_core::ingest::CorrectionPolicy;
use dta_core::mvpbt::SeCovariate;

/// Diagnostic-accuracy meta-analysis: bivariate REML fit, SROC, funnel
/// plot asymmetry tests and the bivariate generalized Egger tests.
///
/// Input CSV columns are `study,TP,FN,FP,TN` in that order.
#[derive(Debug, Parser)]
#[command(name = "dtameta", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the bivariate random-effects model and print its summary.
    Fit(Options),
    /// SROC curve, AUC and partial AUC over the observed FPR range.
    Sroc(Options),
    /// Univariate Egger regression tests for logit sensitivity and logit FPR.
    Egger(Options),
    /// Bivariate score test and its parametric bootstrap version.
    Test(Options),
    /// Full pipeline, written as a JSON report.
    Report(Options),
    /// SROC and funnel plots as SVG, with the plotted series as CSV.
    Plot(Options),
}

impl Command {
    pub fn options(&self) -> &Options {
        match self {
            Self::Fit(o) | Self::Sroc(o) | Self::Egger(o) | Self::Test(o) | Self::Report(o) | Self::Plot(o) => o,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fit(_) => "fit",
            Self::Sroc(_) => "sroc",
            Self::Egger(_) => "egger",
            Self::Test(_) => "test",
            Self::Report(_) => "report",
            Self::Plot(_) => "plot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    All,
    IfAnyZero,
    OnlyZero,
    None,
}

impl From<PolicyArg> for CorrectionPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::All => Self::All,
            PolicyArg::IfAnyZero => Self::IfAnyZero,
            PolicyArg::OnlyZero => Self::OnlyZero,
            PolicyArg::None => Self::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovariateArg {
    Within,
    Total,
}

impl From<CovariateArg> for SeCovariate {
    fn from(c: CovariateArg) -> Self {
        match c {
            CovariateArg::Within => Self::Within,
            CovariateArg::Total => Self::Total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Plain,
    WithDesignTerm,
}

impl From<ConventionArg> for LoglikConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Plain => Self::Plain,
            ConventionArg::WithDesignTerm => Self::WithDesignTerm,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Input CSV file.
    pub input: PathBuf,

    /// Continuity correction added to the cells of the 2×2 tables.
    #[arg(long, default_value_t = 0.5)]
    pub correction: f64,

    /// Which studies receive the continuity correction.
    #[arg(long, value_enum, default_value_t = PolicyArg::All)]
    pub correction_policy: PolicyArg,

    /// Renamed headers, e.g. `study=name,TP=tp_count`.
    #[arg(long)]
    pub column_map: Option<String>,

    /// Number of bootstrap replicates.
    #[arg(long = "B", default_value_t = 2000)]
    pub b: usize,

    /// Master seed for the bootstrap.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Standard error used as the small-study predictor in the bivariate test.
    #[arg(long, value_enum, default_value_t = CovariateArg::Within)]
    pub se_covariate: CovariateArg,

    /// Additive constant convention of the REML log-likelihood.
    #[arg(long, value_enum, default_value_t = ConventionArg::Plain)]
    pub loglik_convention: ConventionArg,

    /// Integration cells for AUC and partial AUC.
    #[arg(long, default_value_t = 5000)]
    pub grid: usize,

    /// Coverage of the confidence and prediction regions.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    /// Output file for the JSON document (stdout for `report` if omitted).
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,

    /// Path prefix for SVG and CSV plot files.
    #[arg(long, default_value = "dtameta")]
    pub plots_prefix: String,
}
