//! Formula language: parsing, the workbook syntax check, reference
//! extraction and canonicalization.

mod ast;
mod canon;
mod parser;

use std::collections::BTreeSet;

use thiserror::Error;

pub use ast::{BinaryOp, CellRef, Function, FormulaAst, UnaryOp};
pub(crate) use ast::format_number;
pub use canon::canonicalize;
pub use parser::{parse_formula, ParseError, ParseErrorKind};

use crate::model::{CellAddress, Workbook};

/// Default upper bound on the number of cells a single range may cover.
pub const DEFAULT_RANGE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("range {range} covers {cells} cells, more than the limit of {limit}")]
pub struct CapacityError {
    pub range: String,
    pub cells: usize,
    pub limit: usize,
}

/// One failing formula in a workbook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxIssue {
    pub cell: CellAddress,
    pub message: String,
    pub position: usize,
}

/// Result of [`syntax_check`]; empty iff every formula parses.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SyntaxReport {
    pub errors: Vec<SyntaxIssue>,
}

impl SyntaxReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Parses every formula cell of the workbook, collecting failures in
/// row-major order. Ranges over [`DEFAULT_RANGE_LIMIT`] count as failures,
/// so a clean report guarantees that [`references_of`] succeeds.
pub fn syntax_check(wb: &Workbook) -> SyntaxReport {
    let mut errors = Vec::new();
    for (addr, src) in wb.formulas() {
        match parse_formula(src) {
            Ok(ast) => {
                if let Err(e) = references_of(&ast, &addr.sheet) {
                    errors.push(SyntaxIssue {
                        cell: addr.clone(),
                        message: e.to_string(),
                        position: 0,
                    });
                }
            }
            Err(e) => errors.push(SyntaxIssue {
                cell: addr.clone(),
                message: e.message,
                position: e.position,
            }),
        }
    }
    errors.sort_by(|a, b| a.cell.cmp(&b.cell));
    SyntaxReport { errors }
}

/// Every cell covered by a range, row-major. The cells carry the start
/// corner's absoluteness flags when both corners agree, relative otherwise.
pub fn expand_range(start: &CellRef, end: &CellRef, limit: usize) -> Result<Vec<CellRef>, CapacityError> {
    let cols = (end.column - start.column + 1) as usize;
    let rows = (end.row - start.row + 1) as usize;
    let cells = cols.saturating_mul(rows);
    if cells > limit {
        return Err(CapacityError {
            range: format!("{}:{}", start, end.local_text()),
            cells,
            limit,
        });
    }
    let col_absolute = start.col_absolute && end.col_absolute;
    let row_absolute = start.row_absolute && end.row_absolute;
    let mut out = Vec::with_capacity(cells);
    for row in start.row..=end.row {
        for column in start.column..=end.column {
            out.push(CellRef {
                sheet: start.sheet.clone(),
                column,
                row,
                col_absolute,
                row_absolute,
            });
        }
    }
    Ok(out)
}

/// Resolved addresses referenced by a formula: ranges expanded, duplicates
/// removed, row-major order.
pub fn references_of(ast: &FormulaAst, home_sheet: &str) -> Result<Vec<CellAddress>, CapacityError> {
    references_with_limit(ast, home_sheet, DEFAULT_RANGE_LIMIT)
}

pub fn references_with_limit(
    ast: &FormulaAst,
    home_sheet: &str,
    limit: usize,
) -> Result<Vec<CellAddress>, CapacityError> {
    let mut out = BTreeSet::new();
    let mut failure = None;
    ast.walk(&mut |node| match node {
        FormulaAst::Ref(r) => {
            out.insert(r.resolve(home_sheet));
        }
        FormulaAst::Range(a, b) => match expand_range(a, b, limit) {
            Ok(cells) => out.extend(cells.iter().map(|c| c.resolve(home_sheet))),
            Err(e) => failure = Some(e),
        },
        _ => {}
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(out.into_iter().collect()),
    }
}
