//! Product metrics, threshold comparison and idiom suggestions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::ValueGrid;
use crate::formula::{canonicalize, expand_range, parse_formula, BinaryOp, CellRef, FormulaAst, Function, DEFAULT_RANGE_LIMIT};
use crate::graph::DependencyGraph;
use crate::model::{CellAddress, CellContent, Workbook};

/// The most connected cell of a dependency graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fan {
    pub cell: String,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub sheet_count: usize,
    pub error_value_count: usize,
    pub value_cell_count: usize,
    pub formula_cell_count: usize,
    pub input_count: usize,
    pub output_count: usize,
    pub max_fan_in: Option<Fan>,
    pub max_fan_out: Option<Fan>,
    pub operator_total: usize,
    pub operand_total: usize,
    pub max_nesting_depth: usize,
    pub longest_chain: usize,
}

/// Names of the scalar metrics, in report order.
pub const METRIC_NAMES: [&str; 10] = [
    "sheet_count",
    "error_value_count",
    "value_cell_count",
    "formula_cell_count",
    "input_count",
    "output_count",
    "operator_total",
    "operand_total",
    "max_nesting_depth",
    "longest_chain",
];

impl QualityMetrics {
    pub fn scalar(&self, name: &str) -> Option<usize> {
        Some(match name {
            "sheet_count" => self.sheet_count,
            "error_value_count" => self.error_value_count,
            "value_cell_count" => self.value_cell_count,
            "formula_cell_count" => self.formula_cell_count,
            "input_count" => self.input_count,
            "output_count" => self.output_count,
            "operator_total" => self.operator_total,
            "operand_total" => self.operand_total,
            "max_nesting_depth" => self.max_nesting_depth,
            "longest_chain" => self.longest_chain,
            _ => return None,
        })
    }
}

fn metric_label(name: &str) -> &'static str {
    match name {
        "sheet_count" => "number of sheets",
        "error_value_count" => "number of error values",
        "value_cell_count" => "number of value cells",
        "formula_cell_count" => "number of formula cells",
        "input_count" => "number of input cells",
        "output_count" => "number of output cells",
        "operator_total" => "number of operators",
        "operand_total" => "number of operands",
        "max_nesting_depth" => "formula nesting depth",
        _ => "longest formula chain",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub factor: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub factor: f64,
    pub offset: f64,
    pub min_idiom_operands: usize,
    pub overrides: BTreeMap<String, Threshold>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            factor: 1.5,
            offset: 1.0,
            min_idiom_operands: 3,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("quality factor must be at least 1, got {0}")]
    Factor(f64),
    #[error("quality offset must be non-negative, got {0}")]
    Offset(f64),
    #[error("min_idiom_operands must be at least 2, got {0}")]
    MinOperands(usize),
    #[error("unknown metric '{0}' in quality overrides")]
    UnknownMetric(String),
}

impl QualityConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_threshold(self.factor, self.offset)?;
        if self.min_idiom_operands < 2 {
            return Err(ConfigError::MinOperands(self.min_idiom_operands));
        }
        for (name, t) in &self.overrides {
            if !METRIC_NAMES.contains(&name.as_str()) {
                return Err(ConfigError::UnknownMetric(name.clone()));
            }
            check_threshold(t.factor, t.offset)?;
        }
        Ok(())
    }

    fn threshold(&self, metric: &str) -> Threshold {
        self.overrides.get(metric).copied().unwrap_or(Threshold {
            factor: self.factor,
            offset: self.offset,
        })
    }
}

fn check_threshold(factor: f64, offset: f64) -> Result<(), ConfigError> {
    // written to also reject NaN
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(ConfigError::Factor(factor));
    }
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(ConfigError::Offset(offset));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum QualityFinding {
    MetricExceeded {
        metric: String,
        submission: usize,
        reference: usize,
    },
    IdiomSuggestion {
        function: Function,
        cells: Vec<CellAddress>,
    },
    DuplicateCalculation {
        cells: Vec<CellAddress>,
    },
}

impl QualityFinding {
    /// Student-facing text; cells on `home` are written without a sheet prefix.
    pub fn message(&self, home: &str) -> String {
        match self {
            QualityFinding::MetricExceeded { metric, submission, reference } => format!(
                "Your solution could be simplified: the {} is {} while the reference solution needs {}.",
                metric_label(metric),
                submission,
                reference
            ),
            QualityFinding::IdiomSuggestion { function, cells } => {
                let name = function.name();
                let article = if name.starts_with(['A', 'E', 'I', 'O', 'U']) { "an" } else { "a" };
                format!(
                    "It is preferable to use {article} {name}-formula in {}.",
                    cell_phrase(cells, home)
                )
            }
            QualityFinding::DuplicateCalculation { cells } => format!(
                "The cells {} contain the same calculation; compute it once and reference that cell.",
                cell_list(cells, home)
            ),
        }
    }
}

pub(crate) fn cell_list(cells: &[CellAddress], home: &str) -> String {
    cells.iter().map(|c| c.display_from(home)).collect::<Vec<_>>().join(", ")
}

pub(crate) fn cell_phrase(cells: &[CellAddress], home: &str) -> String {
    let noun = if cells.len() == 1 { "cell" } else { "cells" };
    format!("{noun} {}", cell_list(cells, home))
}

fn parsed_formulas(wb: &Workbook) -> Vec<(&CellAddress, FormulaAst)> {
    wb.formulas()
        .filter_map(|(addr, src)| parse_formula(src).ok().map(|ast| (addr, ast)))
        .collect()
}

fn nesting_depth(ast: &FormulaAst) -> usize {
    match ast {
        FormulaAst::Binary(_, l, r) => 1 + nesting_depth(l).max(nesting_depth(r)),
        FormulaAst::Call(_, args) => 1 + args.iter().map(nesting_depth).max().unwrap_or(0),
        FormulaAst::Unary(_, x) => nesting_depth(x),
        _ => 0,
    }
}

fn range_size(a: &CellRef, b: &CellRef) -> usize {
    let cols = a.column.abs_diff(b.column) as usize + 1;
    let rows = a.row.abs_diff(b.row) as usize + 1;
    cols * rows
}

fn max_fan<'a>(graph: &'a DependencyGraph, degree: impl Fn(&CellAddress) -> usize, home: &str) -> Option<Fan> {
    let mut best: Option<(&'a CellAddress, usize)> = None;
    for node in graph.nodes() {
        let d = degree(node);
        if best.is_none_or(|(_, b)| d > b) {
            best = Some((node, d));
        }
    }
    best.map(|(cell, count)| Fan {
        cell: cell.display_from(home),
        count,
    })
}

/// Size and structure metrics of one workbook.
pub fn compute_metrics(wb: &Workbook, graph: &DependencyGraph, grid: &ValueGrid) -> QualityMetrics {
    let home = wb.primary_sheet();
    let mut m = QualityMetrics {
        sheet_count: wb.sheets().len(),
        error_value_count: grid.iter().filter(|(_, v)| v.is_error()).count(),
        ..QualityMetrics::default()
    };
    for (_, content) in wb.cells() {
        match content {
            CellContent::Formula(_) => m.formula_cell_count += 1,
            CellContent::Constant(_) => m.value_cell_count += 1,
        }
    }
    for (_, ast) in parsed_formulas(wb) {
        ast.walk(&mut |node| match node {
            FormulaAst::Unary(..) | FormulaAst::Binary(..) | FormulaAst::Call(..) => m.operator_total += 1,
            FormulaAst::Range(a, b) => m.operand_total += range_size(a, b),
            _ => m.operand_total += 1,
        });
        m.max_nesting_depth = m.max_nesting_depth.max(nesting_depth(&ast));
    }
    let (outputs, inputs) = graph.terminals();
    m.output_count = outputs.len();
    m.input_count = inputs.len();
    m.max_fan_in = max_fan(graph, |c| graph.in_degree(c), home);
    m.max_fan_out = max_fan(graph, |c| graph.out_degree(c), home);
    m.longest_chain = graph
        .longest_chain()
        .unwrap_or_else(|_| graph.longest_acyclic_chain());
    m
}

/// Metrics where the submission exceeds `reference * factor + offset`.
pub fn compare_metrics(sub: &QualityMetrics, reference: &QualityMetrics, cfg: &QualityConfig) -> Vec<QualityFinding> {
    METRIC_NAMES
        .iter()
        .filter_map(|&name| {
            let (s, r) = (sub.scalar(name)?, reference.scalar(name)?);
            let t = cfg.threshold(name);
            (s as f64 > r as f64 * t.factor + t.offset).then(|| QualityFinding::MetricExceeded {
                metric: name.to_string(),
                submission: s,
                reference: r,
            })
        })
        .collect()
}

fn add_chain<'a>(ast: &'a FormulaAst, out: &mut Vec<&'a FormulaAst>) {
    match ast {
        FormulaAst::Binary(BinaryOp::Add, l, r) => {
            add_chain(l, out);
            add_chain(r, out);
        }
        other => out.push(other),
    }
}

fn distinct_refs(leaves: &[&FormulaAst], home: &str) -> Option<usize> {
    let mut seen = BTreeSet::new();
    for leaf in leaves {
        match leaf {
            FormulaAst::Ref(r) => {
                seen.insert(r.resolve(home));
            }
            _ => return None,
        }
    }
    Some(seen.len())
}

/// A hand-written average: the canonical form divides a sum of n distinct
/// cells by n.
fn is_manual_average(ast: &FormulaAst, home: &str, min: usize) -> bool {
    let mut uses_avg = false;
    ast.walk(&mut |n| uses_avg |= matches!(n, FormulaAst::Call(Function::Avg, _)));
    if uses_avg {
        return false;
    }
    let Ok(canon) = canonicalize(ast) else {
        return false;
    };
    let FormulaAst::Binary(BinaryOp::Div, sum, divisor) = &canon else {
        return false;
    };
    let FormulaAst::Number(n) = **divisor else {
        return false;
    };
    let mut leaves = Vec::new();
    add_chain(sum, &mut leaves);
    leaves.len() >= min && n == leaves.len() as f64 && distinct_refs(&leaves, home) == Some(leaves.len())
}

/// Whether the formula adds up more than `min` distinct cells with `+`.
fn has_long_sum(ast: &FormulaAst, home: &str, min: usize) -> bool {
    let mut found = false;
    ast.walk(&mut |node| {
        if found || !matches!(node, FormulaAst::Binary(BinaryOp::Add, ..)) {
            return;
        }
        let mut leaves = Vec::new();
        add_chain(node, &mut leaves);
        let cells: BTreeSet<_> = leaves
            .iter()
            .filter_map(|l| match l {
                FormulaAst::Ref(r) => Some(r.resolve(home)),
                _ => None,
            })
            .collect();
        found = cells.len() > min;
    });
    found
}

/// Cells that should use AVG or SUM instead of hand-written arithmetic.
pub fn idiom_suggestions(wb: &Workbook, cfg: &QualityConfig) -> Vec<QualityFinding> {
    let mut avg = Vec::new();
    let mut sum = Vec::new();
    for (addr, ast) in parsed_formulas(wb) {
        if is_manual_average(&ast, &addr.sheet, cfg.min_idiom_operands) {
            avg.push(addr.clone());
        } else if has_long_sum(&ast, &addr.sheet, cfg.min_idiom_operands) {
            sum.push(addr.clone());
        }
    }
    [(Function::Avg, avg), (Function::Sum, sum)]
        .into_iter()
        .filter(|(_, cells)| !cells.is_empty())
        .map(|(function, cells)| QualityFinding::IdiomSuggestion { function, cells })
        .collect()
}

/// Rewrites every reference to its fully qualified, relative form so that
/// equal printed text means equal targets.
fn qualify(ast: &FormulaAst, home: &str) -> FormulaAst {
    let fix = |r: &CellRef| CellRef {
        sheet: Some(r.sheet.clone().unwrap_or_else(|| home.to_string())),
        col_absolute: false,
        row_absolute: false,
        ..r.clone()
    };
    match ast {
        FormulaAst::Ref(r) => FormulaAst::Ref(fix(r)),
        FormulaAst::Range(a, b) => match expand_range(a, b, DEFAULT_RANGE_LIMIT) {
            Ok(cells) if cells.len() == 1 => FormulaAst::Ref(fix(&cells[0])),
            _ => FormulaAst::Range(fix(a), fix(b)),
        },
        FormulaAst::Unary(op, x) => FormulaAst::unary(*op, qualify(x, home)),
        FormulaAst::Binary(op, l, r) => FormulaAst::binary(*op, qualify(l, home), qualify(r, home)),
        FormulaAst::Call(f, args) => FormulaAst::Call(*f, args.iter().map(|a| qualify(a, home)).collect()),
        other => other.clone(),
    }
}

/// Groups of formula cells computing exactly the same thing from the same
/// cells. Fill-down copies point at different cells and are not grouped.
pub fn duplicate_calculations(wb: &Workbook) -> Vec<QualityFinding> {
    let mut groups: BTreeMap<(String, String), Vec<CellAddress>> = BTreeMap::new();
    for (addr, ast) in parsed_formulas(wb) {
        let qualified = qualify(&ast, &addr.sheet);
        let key = canonicalize(&qualified).unwrap_or(qualified).to_string();
        groups.entry((addr.sheet.clone(), key)).or_default().push(addr.clone());
    }
    let mut found: Vec<Vec<CellAddress>> = groups.into_values().filter(|g| g.len() >= 2).collect();
    for g in &mut found {
        g.sort();
    }
    found.sort();
    found
        .into_iter()
        .map(|cells| QualityFinding::DuplicateCalculation { cells })
        .collect()
}
