//! Serializable feedback report.

use serde::{Deserialize, Serialize};

use crate::diff::{Category, Extra, Spelling};
use crate::quality::QualityMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    SyntaxError,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::SyntaxError => "SYNTAX ERROR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisKind {
    ValueError,
    FormulaError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detail {
    pub category: Category,
    pub expected: Vec<String>,
    pub found: Vec<String>,
    pub extras: Vec<Extra>,
    pub spelling: Option<Spelling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnosis {
    pub cell: String,
    pub kind: DiagnosisKind,
    pub detail: Option<Detail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Finding {
    MetricExceeded {
        metric: String,
        submission: usize,
        reference: usize,
        message: String,
    },
    IdiomSuggestion {
        function: String,
        cells: Vec<String>,
        message: String,
    },
    DuplicateCalculation {
        cells: Vec<String>,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsPair {
    pub submission: QualityMetrics,
    pub reference: QualityMetrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntaxEntry {
    pub cell: String,
    pub message: String,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackReport {
    pub task: String,
    pub level: u8,
    pub status: Status,
    pub messages: Vec<String>,
    pub diagnoses: Vec<Diagnosis>,
    pub quality: Vec<Finding>,
    pub metrics: Option<MetricsPair>,
    pub syntax: Vec<SyntaxEntry>,
}

impl FeedbackReport {
    pub fn value_error_count(&self) -> usize {
        self.diagnoses.len()
    }

    pub fn formula_error_count(&self) -> usize {
        self.diagnoses
            .iter()
            .filter(|d| d.kind == DiagnosisKind::FormulaError)
            .count()
    }
}

/// Header line followed by one message per line.
pub fn render_text(report: &FeedbackReport) -> String {
    let mut out = format!("task {}: {}", report.task, report.status.label());
    for m in &report.messages {
        out.push('\n');
        out.push_str(m);
    }
    out
}

/// Pretty-printed JSON with a fixed key order and a trailing newline.
pub fn render_json(report: &FeedbackReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

pub fn parse_report(text: &str) -> Result<FeedbackReport, serde_json::Error> {
    serde_json::from_str(text)
}
