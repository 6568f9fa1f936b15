use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::eval::{evaluate, Tolerance};
use crate::formula::syntax_check;
use crate::graph::DependencyGraph;
use crate::model::{read_workbook, write_workbook, AddressError, CellAddress, FormatError, Workbook};
use crate::quality::{ConfigError, QualityConfig};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("task bundle format error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reference workbook: {0}")]
    Reference(#[from] FormatError),
    #[error("reference workbook has syntax errors, first in cell {cell}: {message}")]
    ReferenceSyntax { cell: String, message: String },
    #[error("reference workbook contains a dependency cycle: {0}")]
    ReferenceCycle(String),
    #[error("bad cell address '{text}': {source}")]
    Address { text: String, source: AddressError },
    #[error("tolerance must be finite and non-negative")]
    Tolerance,
    #[error("material '{0}' has no usable keywords")]
    Keywords(String),
    #[error(transparent)]
    Quality(#[from] ConfigError),
}

/// A lecturer note attached to a rectangular area of the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub start: CellAddress,
    pub end: CellAddress,
    pub text: String,
    pub link: Option<String>,
}

impl Annotation {
    pub fn contains(&self, cell: &CellAddress) -> bool {
        cell.sheet == self.start.sheet
            && (self.start.column..=self.end.column).contains(&cell.column)
            && (self.start.row..=self.end.row).contains(&cell.row)
    }

    pub fn message(&self) -> String {
        match &self.link {
            Some(link) => format!("{} ({link})", self.text),
            None => self.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialEntry {
    pub title: String,
    /// Lowercase, punctuation-free tokens.
    pub keywords: Vec<String>,
    pub reference: Option<String>,
}

/// Everything needed to grade one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskBundle {
    pub task: String,
    pub reference: Workbook,
    pub tolerance: Tolerance,
    pub graded_cells: Option<Vec<CellAddress>>,
    pub annotations: Vec<Annotation>,
    pub materials: Vec<MaterialEntry>,
    pub quality: QualityConfig,
}

/// Lowercases, drops punctuation and splits on whitespace.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBundle {
    task: String,
    reference: Json,
    #[serde(default)]
    tolerance: Tolerance,
    #[serde(default)]
    graded_cells: Option<Vec<String>>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
    #[serde(default)]
    materials: Vec<RawMaterial>,
    #[serde(default)]
    quality: QualityConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotation {
    range: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    title: String,
    keywords: Vec<String>,
    #[serde(default, rename = "ref", skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
}

fn address(text: &str, home: &str) -> Result<CellAddress, BundleError> {
    CellAddress::parse(text.trim(), home).map_err(|source| BundleError::Address {
        text: text.to_string(),
        source,
    })
}

fn range(text: &str, home: &str) -> Result<(CellAddress, CellAddress), BundleError> {
    let (a, b) = match text.rsplit_once(':') {
        Some((a, b)) => {
            let a = address(a, home)?;
            // the end corner lives on the start corner's sheet
            let b = address(b, &a.sheet)?;
            (a, b)
        }
        None => {
            let a = address(text, home)?;
            (a.clone(), a)
        }
    };
    if a.sheet != b.sheet {
        return Err(BundleError::Address {
            text: text.to_string(),
            source: AddressError::Malformed(text.to_string()),
        });
    }
    let start = CellAddress::new(a.sheet.clone(), a.column.min(b.column), a.row.min(b.row));
    let end = CellAddress::new(a.sheet, a.column.max(b.column), a.row.max(b.row));
    Ok((start, end))
}

impl TaskBundle {
    pub fn new(task: impl Into<String>, reference: Workbook) -> Self {
        Self {
            task: task.into(),
            reference,
            tolerance: Tolerance::default(),
            graded_cells: None,
            annotations: Vec::new(),
            materials: Vec::new(),
            quality: QualityConfig::default(),
        }
    }

    /// Reads a bundle file; a string `reference` is a path relative to the
    /// bundle's directory.
    pub fn load(path: &Path) -> Result<Self, BundleError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| BundleError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, |rel| read(&base.join(rel)))
    }

    /// Parses bundle JSON, resolving a path-valued `reference` with `resolve`.
    pub fn from_json(
        text: &str,
        resolve: impl FnOnce(&str) -> Result<String, BundleError>,
    ) -> Result<Self, BundleError> {
        let raw: RawBundle = serde_json::from_str(text)?;
        let reference = match &raw.reference {
            Json::String(path) => read_workbook(&resolve(path)?)?,
            inline => read_workbook(&inline.to_string())?,
        };
        let home = reference.primary_sheet().to_string();
        let graded_cells = raw
            .graded_cells
            .map(|cells| {
                let mut cells = cells.iter().map(|c| address(c, &home)).collect::<Result<Vec<_>, _>>()?;
                cells.sort();
                cells.dedup();
                Ok::<_, BundleError>(cells)
            })
            .transpose()?;
        let annotations = raw
            .annotations
            .into_iter()
            .map(|a| {
                let (start, end) = range(&a.range, &home)?;
                Ok(Annotation { start, end, text: a.text, link: a.link })
            })
            .collect::<Result<Vec<_>, BundleError>>()?;
        let materials = raw
            .materials
            .into_iter()
            .map(|m| MaterialEntry {
                keywords: m.keywords.iter().flat_map(|k| normalize_tokens(k)).collect(),
                title: m.title,
                reference: m.reference,
            })
            .collect();
        let bundle = TaskBundle {
            task: raw.task,
            reference,
            tolerance: raw.tolerance,
            graded_cells,
            annotations,
            materials,
            quality: raw.quality,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Checks the load-time invariants: a clean, acyclic reference and
    /// sane configuration values.
    pub fn validate(&self) -> Result<(), BundleError> {
        if !self.tolerance.is_valid() {
            return Err(BundleError::Tolerance);
        }
        self.quality.validate()?;
        if let Some(m) = self.materials.iter().find(|m| m.keywords.is_empty()) {
            return Err(BundleError::Keywords(m.title.clone()));
        }
        let home = self.reference.primary_sheet();
        if let Some(issue) = syntax_check(&self.reference).errors.first() {
            return Err(BundleError::ReferenceSyntax {
                cell: issue.cell.display_from(home),
                message: issue.message.clone(),
            });
        }
        let grid = evaluate(&self.reference);
        if let Err(cycle) = DependencyGraph::build(&self.reference, &grid).longest_chain() {
            return Err(BundleError::ReferenceCycle(cycle.to_string()));
        }
        Ok(())
    }

    /// Serializes the bundle with the reference workbook inlined.
    pub fn to_json(&self) -> String {
        let home = self.reference.primary_sheet();
        let reference: Json = serde_json::from_str(&write_workbook(&self.reference)).expect("workbook JSON");
        let annotations: Vec<RawAnnotation> = self
            .annotations
            .iter()
            .map(|a| RawAnnotation {
                range: format!("{}:{}", a.start.display_from(home), a.end.a1()),
                text: a.text.clone(),
                link: a.link.clone(),
            })
            .collect();
        let materials: Vec<RawMaterial> = self
            .materials
            .iter()
            .map(|m| RawMaterial {
                title: m.title.clone(),
                keywords: m.keywords.clone(),
                reference: m.reference.clone(),
            })
            .collect();
        let graded: Option<Vec<String>> = self
            .graded_cells
            .as_ref()
            .map(|cells| cells.iter().map(|c| c.display_from(home)).collect());
        let value = serde_json::json!({
            "task": self.task,
            "reference": reference,
            "tolerance": self.tolerance,
            "graded_cells": graded,
            "annotations": annotations,
            "materials": materials,
            "quality": self.quality,
        });
        let mut out = serde_json::to_string_pretty(&value).expect("bundle JSON");
        out.push('\n');
        out
    }
}
