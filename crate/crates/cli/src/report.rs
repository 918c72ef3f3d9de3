//! JSON report. Field order is the struct declaration order, so output is
//! byte-stable for identical inputs and settings.

use std::io;
use std::path::Path;

use dta_core::bivariate::{BivariateFit, FitSummary};
use dta_core::egger::EggerResult;
use dta_core::mvpbt::PBTestResult;
use dta_core::numerics::{Mat2, Vec2};
use dta_core::sroc::HsrocParams;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

/// Bumped on breaking changes to the document layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub command: String,
    pub correction: f64,
    pub correction_policy: String,
    pub column_map: Option<String>,
    pub b: usize,
    pub seed: u64,
    pub rng: String,
    pub se_covariate: String,
    pub loglik_convention: String,
    pub grid: usize,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSection {
    pub summary: FitSummary,
    pub mu: Vec2,
    pub cov_mu: Mat2,
    pub sigma: Mat2,
    pub evaluations: usize,
}

impl From<&BivariateFit> for FitSection {
    fn from(fit: &BivariateFit) -> Self {
        Self {
            summary: dta_core::bivariate::summarize(fit),
            mu: fit.mu,
            cov_mu: fit.cov_mu,
            sigma: fit.sigma,
            evaluations: fit.evaluations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrocSection {
    pub params: HsrocParams,
    pub auc: f64,
    pub pauc: f64,
    pub fpr_range: (f64, f64),
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EggerSection {
    pub logit_sens: EggerResult,
    pub logit_fpr: EggerResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: u32,
    pub tool_version: String,
    /// SHA-256 of the input file bytes.
    pub input_digest: String,
    pub settings: Settings,
    pub n_studies: usize,
    pub fit: Option<FitSection>,
    pub sroc: Option<SrocSection>,
    pub egger: Option<EggerSection>,
    pub msset2: Option<PBTestResult>,
    pub msset3: Option<PBTestResult>,
    pub warnings: Vec<String>,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty printer that writes every float with 17 significant digits.
struct Fixed17<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with stable key order (struct field order) and floats at 17
/// significant digits. Non-finite floats become `null`.
pub fn to_json<T: Serialize>(doc: &T) -> CliResult<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Fixed17(PrettyFormatter::new()));
    doc.serialize(&mut ser).map_err(|e| CliError::Compute(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| CliError::Compute(e.to_string()))
}

pub fn emit_report(doc: &ReportDocument, path: &Path) -> CliResult<()> {
    std::fs::write(path, to_json(doc)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_tracks_bytes() {
        assert_eq!(digest(b"a"), digest(b"a"));
        assert_ne!(digest(b"a"), digest(b"b"));
        assert_eq!(
            digest(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn numbers_round_trip_exactly() {
        let xs = [0.1, 1.0 / 3.0, -1.4483726e-7, 6.02214076e23, f64::MIN_POSITIVE];
        let s = to_json(&xs).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        let s = to_json(&[0.5, -2.0]).unwrap();
        assert!(s.contains("5.0000000000000000e-1"), "{s}");
        assert!(s.contains("-2.0000000000000000e0"), "{s}");
        let nan = to_json(&[f64::NAN]).unwrap();
        assert!(nan.contains("null"));
    }
}
