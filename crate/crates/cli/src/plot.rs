//! Standalone SVG figures and the CSV series behind them.

use std::fmt::Write as _;
use std::path::PathBuf;

use dta_core::bivariate::BivariateFit;
use dta_core::egger::FunnelSeries;
use dta_core::ingest::CorrectedCounts;
use dta_core::numerics::invlogit;
use dta_core::sroc::{confidence_region, map_hsroc, prediction_region, sroc_sens};

use crate::{CliError, CliResult};

const SIZE: f64 = 420.0;
const MARGIN: f64 = 50.0;
const CURVE_POINTS: usize = 200;

/// One plotted series: `(series, label, x, y)` rows in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: &'static str,
    pub points: Vec<(String, f64, f64)>,
}

impl Series {
    fn unlabelled(name: &'static str, pts: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self {
            name,
            points: pts.into_iter().map(|(x, y)| (String::new(), x, y)).collect(),
        }
    }
}

pub fn series_csv(series: &[Series]) -> String {
    let mut out = String::from("series,label,x,y\n");
    for s in series {
        for (label, x, y) in &s.points {
            let _ = writeln!(out, "{},{},{},{}", s.name, label, x, y);
        }
    }
    out
}

/// Linear map from data to pixel coordinates. `flip_y` puts the data
/// minimum at the top (used for the standard error axis of funnel plots).
struct Canvas {
    x: (f64, f64),
    y: (f64, f64),
    flip_y: bool,
    body: String,
}

impl Canvas {
    fn new(x: (f64, f64), y: (f64, f64), flip_y: bool) -> Self {
        Self {
            x,
            y,
            flip_y,
            body: String::new(),
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let inner = SIZE - 2.0 * MARGIN;
        let fx = (x - self.x.0) / (self.x.1 - self.x.0);
        let fy = (y - self.y.0) / (self.y.1 - self.y.0);
        let fy = if self.flip_y { fy } else { 1.0 - fy };
        (MARGIN + fx * inner, MARGIN + fy * inner)
    }

    fn polyline(&mut self, pts: &[(f64, f64)], style: &str, closed: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (a, b) = self.px(x, y);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            self.body,
            r#"<{tag} points="{}" fill="none" {style}/>"#,
            coords.join(" ")
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, class: &str, fill: &str) {
        let (a, b) = self.px(x, y);
        let _ = writeln!(
            self.body,
            r#"<circle class="{class}" cx="{a:.2}" cy="{b:.2}" r="{r}" fill="{fill}"/>"#
        );
    }

    fn axes(&mut self, title: &str, xlabel: &str, ylabel: &str, ticks: usize) {
        let (x0, y0) = (MARGIN, SIZE - MARGIN);
        let _ = writeln!(
            self.body,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
            w = SIZE - 2.0 * MARGIN
        );
        for k in 0..=ticks {
            let t = k as f64 / ticks as f64;
            let xv = self.x.0 + t * (self.x.1 - self.x.0);
            let yv = self.y.0 + t * (self.y.1 - self.y.0);
            let (px, _) = self.px(xv, self.y.0);
            let (_, py) = self.px(self.x.0, yv);
            let _ = writeln!(
                self.body,
                r#"<text x="{px:.2}" y="{:.2}" font-size="10" text-anchor="middle">{xv:.2}</text>"#,
                y0 + 14.0
            );
            let _ = writeln!(
                self.body,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{yv:.2}</text>"#,
                x0 - 4.0,
                py + 3.0
            );
        }
        let _ = writeln!(
            self.body,
            r#"<text x="{:.1}" y="24" font-size="13" text-anchor="middle">{}</text>"#,
            SIZE / 2.0,
            escape(title)
        );
        let _ = writeln!(
            self.body,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            SIZE / 2.0,
            SIZE - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            self.body,
            r#"<text x="14" y="{:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
            SIZE / 2.0,
            SIZE / 2.0,
            escape(ylabel)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SROC figure: study points, summary point, regions and curve.
pub fn sroc_figure(
    fit: &BivariateFit,
    corrected: &[CorrectedCounts],
    level: f64,
) -> CliResult<(String, Vec<Series>, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut series = vec![Series {
        name: "study",
        points: corrected
            .iter()
            .map(|c| (c.id.clone(), c.fpr(), c.sensitivity()))
            .collect(),
    }];
    series.push(Series::unlabelled(
        "summary",
        [(invlogit(fit.mu[1]), invlogit(fit.mu[0]))],
    ));

    if fit.boundary {
        warnings.push("boundary fit: SROC curve and regions omitted from the plot".into());
    } else {
        let params = map_hsroc(fit)?;
        let curve = (0..CURVE_POINTS).map(|k| {
            let fpr = (k as f64 + 0.5) / CURVE_POINTS as f64;
            (fpr, sroc_sens(fpr, &params))
        });
        series.push(Series::unlabelled("sroc", curve));
        series.push(Series::unlabelled("confidence", confidence_region(fit, level)?));
        series.push(Series::unlabelled("prediction", prediction_region(fit, level)?));
    }

    let mut c = Canvas::new((0.0, 1.0), (0.0, 1.0), false);
    c.axes("SROC plot", "False positive rate", "Sensitivity", 5);
    for s in &series {
        let pts: Vec<(f64, f64)> = s.points.iter().map(|p| (p.1, p.2)).collect();
        match s.name {
            "sroc" => c.polyline(&pts, r#"class="sroc" stroke="black" stroke-width="1.5""#, false),
            "confidence" => c.polyline(
                &pts,
                r#"class="confidence" stroke="black" stroke-dasharray="6,3""#,
                true,
            ),
            "prediction" => c.polyline(
                &pts,
                r#"class="prediction" stroke="black" stroke-dasharray="2,3""#,
                true,
            ),
            _ => {}
        }
    }
    for (_, x, y) in &series[0].points {
        c.circle(*x, *y, 3.0, "study", "blue");
    }
    let (_, sx, sy) = &series[1].points[0];
    c.circle(*sx, *sy, 5.0, "summary", "black");
    Ok((c.finish(), series, warnings))
}

/// Funnel figure: effect on x, standard error on y with 0 at the top.
pub fn funnel_figure(title: &str, xlabel: &str, f: &FunnelSeries, ids: &[String]) -> (String, Vec<Series>) {
    let series = vec![
        Series {
            name: "study",
            points: ids
                .iter()
                .cloned()
                .zip(f.points.iter())
                .map(|(id, &(y, se))| (id, y, se))
                .collect(),
        },
        Series::unlabelled("center", [(f.center, 0.0), (f.center, f.se_max)]),
        Series::unlabelled("contour_lower", f.contour.iter().map(|&(se, lo, _)| (lo, se))),
        Series::unlabelled("contour_upper", f.contour.iter().map(|&(se, _, hi)| (hi, se))),
    ];

    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let pad = 0.05 * (hi - lo).max(1e-6);
    let mut c = Canvas::new((lo - pad, hi + pad), (0.0, f.se_max.max(1e-6)), true);
    c.axes(title, xlabel, "Standard error", 4);
    for s in &series[1..] {
        let pts: Vec<(f64, f64)> = s.points.iter().map(|p| (p.1, p.2)).collect();
        let style = if s.name == "center" {
            r#"class="center" stroke="black""#
        } else {
            r#"class="contour" stroke="black" stroke-dasharray="4,3""#
        };
        c.polyline(&pts, style, false);
    }
    for (_, x, y) in &series[0].points {
        c.circle(*x, *y, 3.0, "study", "black");
    }
    (c.finish(), series)
}

fn write(path: PathBuf, contents: &str) -> CliResult<()> {
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `<prefix>_sroc.svg`, `<prefix>_funnel_sens.svg`,
/// `<prefix>_funnel_fpr.svg` and a `.csv` of the series next to each.
pub fn emit_plots(
    fit: &BivariateFit,
    corrected: &[CorrectedCounts],
    funnels: &[FunnelSeries; 2],
    level: f64,
    prefix: &str,
) -> CliResult<Vec<String>> {
    let path = |suffix: &str| PathBuf::from(format!("{prefix}_{suffix}"));
    let (svg, series, warnings) = sroc_figure(fit, corrected, level)?;
    write(path("sroc.svg"), &svg)?;
    write(path("sroc.csv"), &series_csv(&series))?;

    let ids: Vec<String> = corrected.iter().map(|c| c.id.clone()).collect();
    for (f, stem, title, label) in [
        (&funnels[0], "funnel_sens", "Funnel plot for logit(Se)", "logit(Se)"),
        (&funnels[1], "funnel_fpr", "Funnel plot for logit(FPR)", "logit(FPR)"),
    ] {
        let (svg, series) = funnel_figure(title, label, f, &ids);
        write(path(&format!("{stem}.svg")), &svg)?;
        write(path(&format!("{stem}.csv")), &series_csv(&series))?;
    }
    Ok(warnings)
}
