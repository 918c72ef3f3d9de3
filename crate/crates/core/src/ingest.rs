//! Study-level 2×2 tables: CSV parsing, continuity correction and the
//! transform to logit sensitivity / logit FPR with within-study covariance.
//!
//! Canonical CSV column order is `study,TP,FN,FP,TN`. Note that this differs
//! from the (TP, FN, TN, FP) argument order some R helpers use; the header
//! is always checked so a transposed file cannot be read silently.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::{logit, Mat2, Vec2};
use crate::{Error, Result};

pub const CANONICAL_COLUMNS: [&str; 5] = ["study", "TP", "FN", "FP", "TN"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyTable {
    pub id: String,
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl StudyTable {
    pub fn new(id: impl Into<String>, tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self {
            id: id.into(),
            tp,
            fn_,
            fp,
            tn,
        }
    }

    pub fn has_zero_cell(&self) -> bool {
        [self.tp, self.fn_, self.fp, self.tn].contains(&0)
    }
}

/// Cell counts after continuity correction, carried as reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedCounts {
    pub id: String,
    pub tp: f64,
    pub fn_: f64,
    pub fp: f64,
    pub tn: f64,
}

impl CorrectedCounts {
    pub fn sensitivity(&self) -> f64 {
        self.tp / (self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        self.fp / (self.fp + self.tn)
    }
}

impl From<&StudyTable> for CorrectedCounts {
    fn from(t: &StudyTable) -> Self {
        Self {
            id: t.id.clone(),
            tp: t.tp as f64,
            fn_: t.fn_ as f64,
            fp: t.fp as f64,
            tn: t.tn as f64,
        }
    }
}

/// One study on the logit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedStudy {
    pub id: String,
    /// (logit sensitivity, logit FPR)
    pub y: Vec2,
    /// Within-study covariance; diagonal because the two proportions come
    /// from disjoint groups of subjects.
    pub s: Mat2,
    pub se: Vec2,
}

impl TransformedStudy {
    /// Builds a study directly from an outcome pair and within-study variances.
    pub fn from_parts(id: impl Into<String>, y: Vec2, v: Vec2) -> Result<Self> {
        if !(v[0] > 0.0 && v[1] > 0.0) || !v[0].is_finite() || !v[1].is_finite() {
            return Err(Error::Domain(format!(
                "within-study variances must be positive and finite, got {v:?}"
            )));
        }
        Ok(Self {
            id: id.into(),
            y,
            s: Mat2::diag(v[0], v[1]),
            se: [v[0].sqrt(), v[1].sqrt()],
        })
    }

    /// Same study with a new outcome vector (used by the bootstrap).
    pub fn with_y(&self, y: Vec2) -> Self {
        Self { y, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionPolicy {
    /// Add the constant to every cell of every study.
    #[default]
    All,
    /// Add it to every cell of every study, but only if some study has a zero cell.
    IfAnyZero,
    /// Add it only to studies that contain a zero cell.
    OnlyZero,
    None,
}

impl FromStr for CorrectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Self::All),
            "if-any-zero" => Ok(Self::IfAnyZero),
            "only-zero" => Ok(Self::OnlyZero),
            "none" => Ok(Self::None),
            other => Err(Error::Domain(format!(
                "unknown correction policy '{other}' (expected all, if-any-zero, only-zero or none)"
            ))),
        }
    }
}

impl fmt::Display for CorrectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::All => "all",
            Self::IfAnyZero => "if-any-zero",
            Self::OnlyZero => "only-zero",
            Self::None => "none",
        })
    }
}

/// Header names to look for in place of the canonical `study,TP,FN,FP,TN`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub names: [String; 5],
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            names: CANONICAL_COLUMNS.map(String::from),
        }
    }
}

impl ColumnMap {
    /// Parses `TP=true_pos,FN=false_neg,...`; unmentioned columns keep
    /// their canonical names.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for pair in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::Domain(format!("column map entry '{pair}' is not of the form CANONICAL=header"))
            })?;
            let idx = CANONICAL_COLUMNS
                .iter()
                .position(|c| c.eq_ignore_ascii_case(key.trim()))
                .ok_or_else(|| Error::Domain(format!("unknown canonical column '{}'", key.trim())))?;
            map.names[idx] = value.trim().to_string();
        }
        Ok(map)
    }
}

pub fn parse_studies(text: &str) -> Result<Vec<StudyTable>> {
    parse_studies_with(text, &ColumnMap::default())
}

pub fn parse_studies_with(text: &str, columns: &ColumnMap) -> Result<Vec<StudyTable>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim().is_empty() {
        return Err(Error::EmptyInput("file is empty".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| Error::EmptyInput(format!("unreadable header: {e}")))?
        .clone();
    if header.len() != 5 {
        return Err(Error::Input {
            row: 0,
            column: "header".into(),
            message: format!(
                "expected 5 columns ({}), found {}",
                columns.names.join(","),
                header.len()
            ),
        });
    }
    for (i, (found, expected)) in header.iter().zip(&columns.names).enumerate() {
        if !found.eq_ignore_ascii_case(expected) {
            return Err(Error::Input {
                row: 0,
                column: CANONICAL_COLUMNS[i].into(),
                message: format!("expected header '{expected}', found '{found}'"),
            });
        }
    }

    let mut studies = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Input {
            row,
            column: "-".into(),
            message: e.to_string(),
        })?;
        if record.len() != 5 {
            return Err(Error::Input {
                row,
                column: "-".into(),
                message: format!("expected 5 fields, found {}", record.len()),
            });
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::Input {
                row,
                column: CANONICAL_COLUMNS[0].into(),
                message: "empty study id".into(),
            });
        }
        let mut counts = [0u64; 4];
        for (k, count) in counts.iter_mut().enumerate() {
            let raw = &record[k + 1];
            *count = raw.parse::<u64>().map_err(|_| Error::Input {
                row,
                column: CANONICAL_COLUMNS[k + 1].into(),
                message: format!("'{raw}' is not a nonnegative integer count"),
            })?;
        }
        let [tp, fn_, fp, tn] = counts;
        if tp + fn_ == 0 {
            return Err(Error::Input {
                row,
                column: "TP+FN".into(),
                message: "study has no diseased subjects".into(),
            });
        }
        if fp + tn == 0 {
            return Err(Error::Input {
                row,
                column: "FP+TN".into(),
                message: "study has no non-diseased subjects".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Input {
                row,
                column: CANONICAL_COLUMNS[0].into(),
                message: format!("duplicate study id '{id}'"),
            });
        }
        studies.push(StudyTable::new(id, tp, fn_, fp, tn));
    }
    if studies.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    Ok(studies)
}

pub fn apply_correction(t: &StudyTable, c: f64, policy: CorrectionPolicy) -> CorrectedCounts {
    let add = match policy {
        CorrectionPolicy::All => c,
        CorrectionPolicy::OnlyZero if t.has_zero_cell() => c,
        CorrectionPolicy::IfAnyZero | CorrectionPolicy::OnlyZero | CorrectionPolicy::None => 0.0,
    };
    let mut out = CorrectedCounts::from(t);
    out.tp += add;
    out.fn_ += add;
    out.fp += add;
    out.tn += add;
    out
}

/// Corrects a whole data set. Differs from mapping [`apply_correction`]
/// only for [`CorrectionPolicy::IfAnyZero`], which looks across studies.
pub fn correct_all(tables: &[StudyTable], c: f64, policy: CorrectionPolicy) -> Result<Vec<CorrectedCounts>> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!(
            "correction must be a finite value >= 0, got {c}"
        )));
    }
    let policy = match policy {
        CorrectionPolicy::IfAnyZero if tables.iter().any(StudyTable::has_zero_cell) => CorrectionPolicy::All,
        p => p,
    };
    Ok(tables.iter().map(|t| apply_correction(t, c, policy)).collect())
}

pub fn transform_study(c: &CorrectedCounts) -> Result<TransformedStudy> {
    if ![c.tp, c.fn_, c.fp, c.tn].iter().all(|&v| v > 0.0) {
        return Err(Error::ZeroCell { id: c.id.clone() });
    }
    let y = [logit(c.sensitivity())?, logit(c.fpr())?];
    let v = [1.0 / c.tp + 1.0 / c.fn_, 1.0 / c.fp + 1.0 / c.tn];
    TransformedStudy::from_parts(c.id.clone(), y, v)
}

/// Parse-free convenience: correct and transform a list of tables.
pub fn prepare(tables: &[StudyTable], c: f64, policy: CorrectionPolicy) -> Result<Vec<TransformedStudy>> {
    correct_all(tables, c, policy)?.iter().map(transform_study).collect()
}
