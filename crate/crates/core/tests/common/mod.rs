//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use sheetgrade::eval::{eval_formula, values_equal, Tolerance, ValueGrid};
use sheetgrade::formula::{parse_formula, FormulaAst};
use sheetgrade::model::{CellAddress, CellContent, Value, Workbook};

pub fn formula_cells(wb: &Workbook) -> Vec<(CellAddress, FormulaAst)> {
    wb.formulas()
        .map(|(a, src)| (a.clone(), parse_formula(src).expect("generated formula parses")))
        .collect()
}

/// Naive evaluator: recompute every formula from the previous round's
/// values until nothing changes.
pub fn fixed_point(wb: &Workbook) -> BTreeMap<CellAddress, Value> {
    let formulas = formula_cells(wb);
    let mut current: BTreeMap<CellAddress, Value> = wb
        .cells()
        .map(|(a, c)| match c {
            CellContent::Constant(v) => (a.clone(), v.clone()),
            CellContent::Formula(_) => (a.clone(), Value::Blank),
        })
        .collect();
    for _ in 0..=formulas.len() + 1 {
        let lookup = |a: &CellAddress| current.get(a).cloned().unwrap_or_default();
        let next: Vec<(CellAddress, Value)> = formulas
            .iter()
            .map(|(a, ast)| (a.clone(), eval_formula(ast, &a.sheet, &lookup)))
            .collect();
        let mut changed = false;
        for (a, v) in next {
            if current.get(&a) != Some(&v) {
                changed = true;
                current.insert(a, v);
            }
        }
        if !changed {
            break;
        }
    }
    current
}

/// Cells whose values differ between two evaluated workbooks.
pub fn grid_diff(a: &ValueGrid, b: &ValueGrid, tolerance: &Tolerance) -> BTreeSet<CellAddress> {
    let cells: BTreeSet<&CellAddress> = a.iter().map(|(c, _)| c).chain(b.iter().map(|(c, _)| c)).collect();
    cells
        .into_iter()
        .filter(|c| !values_equal(&a.get(c), &b.get(c), tolerance))
        .cloned()
        .collect()
}

