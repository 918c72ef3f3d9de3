use std::io::Write;

use dta_core::bivariate::{fit_reitsma, BivariateFit, FitOptions};
use dta_core::egger::{egger_test, funnel_series, uni_reml_fit, FunnelSeries};
use dta_core::ingest::{
    correct_all, parse_studies_with, transform_study, ColumnMap, CorrectedCounts, TransformedStudy,
};
use dta_core::mvpbt::{msset2, msset3, TestOptions};
use dta_core::numerics::RngStream;
use dta_core::sroc::sroc_curve;

use crate::args::{Command, Options};
use crate::plot;
use crate::report::{self, EggerSection, FitSection, ReportDocument, Settings, SrocSection};
use crate::{CliError, CliResult};

/// Points on the plotted SROC curve.
const CURVE_POINTS: usize = 200;

pub struct Dataset {
    pub digest: String,
    pub corrected: Vec<CorrectedCounts>,
    pub studies: Vec<TransformedStudy>,
}

pub fn load(opts: &Options) -> CliResult<Dataset> {
    let bytes = std::fs::read(&opts.input).map_err(|e| CliError::Io(format!("{}: {e}", opts.input.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("{}: not valid UTF-8", opts.input.display())))?;
    let columns = match &opts.column_map {
        Some(map) => ColumnMap::parse(map)?,
        None => ColumnMap::default(),
    };
    let tables = parse_studies_with(&text, &columns)?;
    let corrected = correct_all(&tables, opts.correction, opts.correction_policy.into())?;
    let studies = corrected.iter().map(transform_study).collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        digest: report::digest(&bytes),
        corrected,
        studies,
    })
}

pub fn settings(command: &Command) -> Settings {
    let o = command.options();
    Settings {
        command: command.name().to_string(),
        correction: o.correction,
        correction_policy: dta_core::ingest::CorrectionPolicy::from(o.correction_policy).to_string(),
        column_map: o.column_map.clone(),
        b: o.b,
        seed: o.seed,
        rng: RngStream::ALGORITHM.to_string(),
        se_covariate: dta_core::mvpbt::SeCovariate::from(o.se_covariate).to_string(),
        loglik_convention: dta_core::bivariate::LoglikConvention::from(o.loglik_convention).to_string(),
        grid: o.grid,
        level: o.level,
    }
}

fn validate(command: &Command) -> CliResult<()> {
    let o = command.options();
    if !(o.level > 0.0 && o.level < 1.0) {
        return Err(CliError::Input(format!("--level must lie in (0, 1), got {}", o.level)));
    }
    if o.grid == 0 {
        return Err(CliError::Input("--grid must be positive".into()));
    }
    if matches!(command, Command::Test(_) | Command::Report(_)) && o.b < dta_core::mvpbt::MIN_BOOTSTRAP {
        return Err(CliError::Input(format!(
            "--B must be at least {}, got {}",
            dta_core::mvpbt::MIN_BOOTSTRAP,
            o.b
        )));
    }
    Ok(())
}

fn fit_options(o: &Options) -> FitOptions {
    FitOptions {
        convention: o.loglik_convention.into(),
        ..FitOptions::default()
    }
}

fn test_options(o: &Options) -> TestOptions {
    TestOptions {
        fit: fit_options(o),
        covariate: o.se_covariate.into(),
    }
}

fn outcome(studies: &[TransformedStudy], j: usize) -> (Vec<f64>, Vec<f64>) {
    studies.iter().map(|s| (s.y[j], s.s.diagonal()[j])).unzip()
}

pub fn fit_section(data: &Dataset, o: &Options, warnings: &mut Vec<String>) -> CliResult<(BivariateFit, FitSection)> {
    let fit = fit_reitsma(&data.studies, &fit_options(o))?;
    if !fit.converged {
        warnings.push("REML optimizer did not converge; estimates are the best point found".into());
    }
    if fit.boundary {
        warnings.push("between-study covariance estimate is on the boundary".into());
    }
    let section = FitSection::from(&fit);
    Ok((fit, section))
}

pub fn sroc_section(data: &Dataset, fit: &BivariateFit, o: &Options) -> CliResult<SrocSection> {
    let fprs: Vec<f64> = data.corrected.iter().map(CorrectedCounts::fpr).collect();
    let curve = sroc_curve(fit, &fprs, o.grid, CURVE_POINTS)?;
    Ok(SrocSection {
        params: curve.params,
        auc: curve.auc,
        pauc: curve.pauc,
        fpr_range: curve.fpr_range,
        grid: o.grid,
    })
}

pub fn egger_section(data: &Dataset) -> CliResult<EggerSection> {
    let (y1, v1) = outcome(&data.studies, 0);
    let (y2, v2) = outcome(&data.studies, 1);
    Ok(EggerSection {
        logit_sens: egger_test(&y1, &v1)?,
        logit_fpr: egger_test(&y2, &v2)?,
    })
}

pub fn funnels(data: &Dataset) -> CliResult<[FunnelSeries; 2]> {
    let series = |j| -> CliResult<FunnelSeries> {
        let (y, v) = outcome(&data.studies, j);
        let fit = uni_reml_fit(&y, &v)?;
        Ok(funnel_series(&y, &v, &fit)?)
    };
    Ok([series(0)?, series(1)?])
}

/// Builds the document for `command`; sections not computed by it stay empty.
pub fn build_document(command: &Command) -> CliResult<ReportDocument> {
    validate(command)?;
    let o = command.options();
    let data = load(o)?;
    let mut warnings = Vec::new();
    let mut doc = ReportDocument {
        schema: report::SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_digest: data.digest.clone(),
        settings: settings(command),
        n_studies: data.studies.len(),
        fit: None,
        sroc: None,
        egger: None,
        msset2: None,
        msset3: None,
        warnings: Vec::new(),
    };

    let wants = |names: &[&str]| names.contains(&command.name());
    if wants(&["fit", "sroc", "report", "plot"]) {
        let (fit, section) = fit_section(&data, o, &mut warnings)?;
        doc.fit = Some(section);
        if wants(&["sroc", "report"]) {
            match sroc_section(&data, &fit, o) {
                Ok(s) => doc.sroc = Some(s),
                Err(e) if fit.boundary => warnings.push(format!("SROC omitted: {e}")),
                Err(e) => return Err(e),
            }
        }
    }
    if wants(&["egger", "report"]) {
        doc.egger = Some(egger_section(&data)?);
    }
    if wants(&["test", "report"]) {
        let t = test_options(o);
        doc.msset2 = Some(msset2(&data.studies, &t)?);
        let boot = msset3(&data.studies, o.b, o.seed, &t)?;
        warnings.extend(boot.warnings.iter().cloned());
        doc.msset3 = Some(boot);
    }
    doc.warnings = warnings;
    Ok(doc)
}

fn print_text(doc: &ReportDocument, out: &mut impl Write) -> std::io::Result<()> {
    if let Some(fit) = &doc.fit {
        write!(out, "{}", fit.summary)?;
    }
    if let Some(s) = &doc.sroc {
        writeln!(out, "AUC: {:.3}", s.auc)?;
        writeln!(
            out,
            "Partial AUC (restricted to observed FPRs and normalized): {:.3}",
            s.pauc
        )?;
    }
    if let Some(e) = &doc.egger {
        for (name, r) in [("logit(Se)", &e.logit_sens), ("logit(FPR)", &e.logit_fpr)] {
            writeln!(
                out,
                "Egger test for {name} (weighted regression with multiplicative dispersion)"
            )?;
            writeln!(out, "  t = {:.4}, df = {}, p = {:.4}", r.t, r.df, r.p)?;
            writeln!(
                out,
                "  limit estimate b = {:.4} (CI: {:.4}, {:.4})",
                r.limit_b, r.ci_lb, r.ci_ub
            )?;
        }
    }
    if let Some(t) = &doc.msset2 {
        writeln!(out, "Score test (chi-square reference): T = {:.6}, P = {:.9}", t.t, t.p)?;
        writeln!(out, "  null means b0 = ({:.7}, {:.7})", t.b0[0], t.b0[1])?;
    }
    if let Some(t) = &doc.msset3 {
        writeln!(
            out,
            "Score test (parametric bootstrap, B = {}, seed = {}): T = {:.6}, P = {:.9}",
            t.b, t.seed, t.t, t.p
        )?;
        if t.n_failed > 0 {
            writeln!(out, "  {} replicates failed", t.n_failed)?;
        }
    }
    Ok(())
}

/// Runs a parsed command. Returns the warnings to report.
pub fn execute(cli: &crate::Cli) -> CliResult<Vec<String>> {
    let command = &cli.command;
    let o = command.options();
    if let Command::Plot(_) = command {
        validate(command)?;
        let data = load(o)?;
        let mut warnings = Vec::new();
        let (fit, _) = fit_section(&data, o, &mut warnings)?;
        let funnels = funnels(&data)?;
        warnings.extend(plot::emit_plots(
            &fit,
            &data.corrected,
            &funnels,
            o.level,
            &o.plots_prefix,
        )?);
        return Ok(warnings);
    }

    let doc = build_document(command)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match (&o.out, command) {
        (Some(path), _) => report::emit_report(&doc, path)?,
        (None, Command::Report(_)) => {
            lock.write_all(report::to_json(&doc)?.as_bytes())
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        (None, _) => {}
    }
    if !matches!(command, Command::Report(_)) {
        print_text(&doc, &mut lock).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if let Some(fit) = &doc.fit {
        if !fit.summary.converged {
            for w in &doc.warnings {
                eprintln!("warning: {w}");
            }
            return Err(CliError::Compute("REML fit did not converge".into()));
        }
    }
    Ok(doc.warnings)
}
