//! Value matching over the reference solution's dependency graph.
//!
//! Every output node of the reference graph starts a depth-first search
//! that skips nodes already seen by an earlier search. A node's submission
//! value is compared to the solution value on entry. After all of its
//! children are done, a mismatching node is re-evaluated against the
//! working copy, where earlier formula errors have been replaced by the
//! solution's values. If it still mismatches, its own formula is wrong: it
//! becomes a formula error and is overwritten in the working copy.
//! Otherwise the mismatch was propagated from below.

use std::collections::BTreeSet;

use crate::eval::{values_equal, Program, Tolerance, ValueGrid};
use crate::graph::DependencyGraph;
use crate::model::{CellAddress, CellContent, Value, Workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    FirstCompare,
    ReEvaluate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub cell: CellAddress,
    pub phase: Phase,
    pub solution: Value,
    pub submission: Value,
    pub matched: bool,
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    /// Row-major.
    pub value_errors: Vec<CellAddress>,
    /// Row-major; always a subset of `value_errors`.
    pub formula_errors: Vec<CellAddress>,
    /// The submission with every formula error replaced by the solution value.
    pub corrected: Workbook,
    pub trace: Vec<TraceEntry>,
}

impl MatchResult {
    pub fn is_correct(&self) -> bool {
        self.value_errors.is_empty()
    }

    pub fn is_formula_error(&self, cell: &CellAddress) -> bool {
        self.formula_errors.binary_search(cell).is_ok()
    }
}

struct WorkingCopy {
    program: Program,
    grid: Option<ValueGrid>,
}

impl WorkingCopy {
    fn value(&mut self, addr: &CellAddress) -> Value {
        let program = &self.program;
        self.grid.get_or_insert_with(|| program.evaluate()).get(addr)
    }

    fn overwrite(&mut self, addr: &CellAddress, value: Value) {
        self.program.set_constant(addr.clone(), value);
        self.grid = None;
    }
}

/// Compares a submission against the reference solution.
///
/// `graded` restricts the comparison to the listed cells and everything
/// they depend on in the reference graph; `None` grades all reference nodes.
/// Both workbooks are expected to pass the syntax check.
pub fn match_values(
    reference: &Workbook,
    submission: &Workbook,
    tolerance: &Tolerance,
    graded: Option<&[CellAddress]>,
) -> MatchResult {
    let ref_program = Program::compile(reference);
    let ref_grid = ref_program.evaluate();
    let graph = DependencyGraph::from_program(&ref_program, &ref_grid);
    let sub_program = Program::compile(submission);
    let sub_grid = sub_program.evaluate();

    let roots: Vec<CellAddress> = match graded {
        Some(cells) => cells.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
        None => graph.terminals().0,
    };

    let mut working = WorkingCopy {
        program: sub_program,
        grid: Some(sub_grid.clone()),
    };
    let mut corrected = submission.clone();
    let mut visited: BTreeSet<&CellAddress> = BTreeSet::new();
    let mut value_errors = BTreeSet::new();
    let mut formula_errors = BTreeSet::new();
    let mut trace = Vec::new();

    for root in &roots {
        if !visited.insert(root) {
            continue;
        }
        let mut stack: Vec<(&CellAddress, Vec<&CellAddress>, usize)> = Vec::new();
        enter(root, &ref_grid, &sub_grid, tolerance, &mut value_errors, &mut trace);
        stack.push((root, graph.out_neighbors(root).collect(), 0));

        while let Some((node, children, idx)) = stack.last_mut() {
            if let Some(&child) = children.get(*idx) {
                *idx += 1;
                if visited.insert(child) {
                    enter(child, &ref_grid, &sub_grid, tolerance, &mut value_errors, &mut trace);
                    stack.push((child, graph.out_neighbors(child).collect(), 0));
                }
                continue;
            }
            let node = *node;
            stack.pop();
            if !value_errors.contains(node) {
                continue;
            }
            let solution = ref_grid.get(node);
            let now = working.value(node);
            let matched = values_equal(&solution, &now, tolerance);
            trace.push(TraceEntry {
                cell: node.clone(),
                phase: Phase::ReEvaluate,
                solution: solution.clone(),
                submission: now,
                matched,
            });
            if !matched {
                formula_errors.insert(node.clone());
                working.overwrite(node, solution.clone());
                corrected.set(node.clone(), CellContent::Constant(solution));
            }
        }
    }

    MatchResult {
        value_errors: value_errors.into_iter().collect(),
        formula_errors: formula_errors.into_iter().collect(),
        corrected,
        trace,
    }
}

fn enter(
    node: &CellAddress,
    ref_grid: &ValueGrid,
    sub_grid: &ValueGrid,
    tolerance: &Tolerance,
    value_errors: &mut BTreeSet<CellAddress>,
    trace: &mut Vec<TraceEntry>,
) {
    let solution = ref_grid.get(node);
    let submission = sub_grid.get(node);
    let matched = values_equal(&solution, &submission, tolerance);
    if !matched {
        value_errors.insert(node.clone());
    }
    trace.push(TraceEntry {
        cell: node.clone(),
        phase: Phase::FirstCompare,
        solution,
        submission,
        matched,
    });
}
