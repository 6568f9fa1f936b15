//! Workbook evaluation and tolerant value comparison.

mod functions;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

pub use functions::apply_function;
pub(crate) use functions::is_aggregate;

use crate::formula::{expand_range, parse_formula, references_of, FormulaAst, DEFAULT_RANGE_LIMIT};
use crate::model::{CellAddress, CellContent, ErrorKind, Value, Workbook};

/// Numeric comparison tolerance: two numbers match when
/// `|a - b| <= max(abs, rel * max(|a|, |b|))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-9, rel: 1e-9 }
    }
}

impl Tolerance {
    pub fn is_valid(&self) -> bool {
        self.abs >= 0.0 && self.rel >= 0.0 && self.abs.is_finite() && self.rel.is_finite()
    }

    pub fn numbers_equal(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.abs.max(self.rel * a.abs().max(b.abs()))
    }
}

/// Reflexive and symmetric, but not transitive for numbers.
pub fn values_equal(a: &Value, b: &Value, t: &Tolerance) -> bool {
    match (a, b) {
        (Value::Blank, Value::Blank) => true,
        (Value::Number(x), Value::Number(y)) => t.numbers_equal(*x, *y),
        (Value::Text(x), Value::Text(y)) => x.trim() == y.trim(),
        (Value::Boolean(x), Value::Boolean(y)) => x == y,
        (Value::Error(x), Value::Error(y)) => x == y,
        _ => false,
    }
}

/// Evaluated values. Addresses not present are Blank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueGrid {
    values: BTreeMap<CellAddress, Value>,
}

impl ValueGrid {
    pub fn get(&self, addr: &CellAddress) -> Value {
        self.values.get(addr).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellAddress, &Value)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn set(&mut self, addr: CellAddress, value: Value) {
        self.values.insert(addr, value);
    }
}

/// Evaluates one formula against arbitrary cell values. `lookup` is called
/// for every referenced cell (including each cell of a range).
pub fn eval_formula(ast: &FormulaAst, home_sheet: &str, lookup: &dyn Fn(&CellAddress) -> Value) -> Value {
    match eval_node(ast, home_sheet, lookup) {
        // a formula whose result is an empty cell shows 0
        Value::Blank => Value::Number(0.0),
        v => v,
    }
}

fn eval_node(ast: &FormulaAst, home: &str, lookup: &dyn Fn(&CellAddress) -> Value) -> Value {
    match ast {
        FormulaAst::Number(n) => Value::number(*n),
        FormulaAst::Text(s) => Value::Text(s.clone()),
        FormulaAst::Bool(b) => Value::Boolean(*b),
        FormulaAst::Ref(r) => lookup(&r.resolve(home)),
        // a range outside an aggregate has no scalar value
        FormulaAst::Range(..) => Value::Error(ErrorKind::BadValue),
        FormulaAst::Unary(op, e) => functions::apply_unary(*op, &eval_node(e, home, lookup)),
        FormulaAst::Binary(op, l, r) => {
            functions::apply_binary(*op, &eval_node(l, home, lookup), &eval_node(r, home, lookup))
        }
        FormulaAst::Call(func, args) => {
            let mut values = Vec::with_capacity(args.len());
            for arg in args {
                match arg {
                    FormulaAst::Range(a, b) if is_aggregate(*func) => {
                        match expand_range(a, b, DEFAULT_RANGE_LIMIT) {
                            Ok(cells) => values.extend(cells.iter().map(|c| lookup(&c.resolve(home)))),
                            Err(_) => values.push(Value::Error(ErrorKind::BadRef)),
                        }
                    }
                    other => values.push(eval_node(other, home, lookup)),
                }
            }
            apply_function(*func, &values)
        }
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Constant(Value),
    Formula {
        ast: Arc<FormulaAst>,
        refs: Vec<CellAddress>,
    },
    /// Unparseable formula; only reachable when the syntax check was skipped.
    Invalid,
}

/// A workbook with its formulas parsed, ready for repeated evaluation.
/// Cells can be overwritten with constants, which is how corrected working
/// copies are built.
#[derive(Debug, Clone)]
pub struct Program {
    sheets: BTreeSet<String>,
    cells: BTreeMap<CellAddress, Compiled>,
}

impl Program {
    pub fn compile(wb: &Workbook) -> Program {
        let sheets = wb.sheets().iter().map(|s| s.name.clone()).collect();
        let cells = wb
            .cells()
            .map(|(addr, content)| {
                let compiled = match content {
                    CellContent::Constant(v) => Compiled::Constant(v.clone()),
                    CellContent::Formula(src) => match parse_formula(src) {
                        Ok(ast) => match references_of(&ast, &addr.sheet) {
                            Ok(refs) => Compiled::Formula {
                                ast: Arc::new(ast),
                                refs,
                            },
                            Err(_) => Compiled::Invalid,
                        },
                        Err(_) => Compiled::Invalid,
                    },
                };
                (addr.clone(), compiled)
            })
            .collect();
        Program { sheets, cells }
    }

    pub fn has_sheet(&self, sheet: &str) -> bool {
        self.sheets.contains(sheet)
    }

    pub fn formula(&self, addr: &CellAddress) -> Option<&FormulaAst> {
        match self.cells.get(addr) {
            Some(Compiled::Formula { ast, .. }) => Some(ast),
            _ => None,
        }
    }

    pub fn is_formula(&self, addr: &CellAddress) -> bool {
        matches!(self.cells.get(addr), Some(Compiled::Formula { .. } | Compiled::Invalid))
    }

    /// Referenced addresses of a formula cell (empty for constants).
    pub fn references(&self, addr: &CellAddress) -> &[CellAddress] {
        match self.cells.get(addr) {
            Some(Compiled::Formula { refs, .. }) => refs,
            _ => &[],
        }
    }

    pub fn formula_cells(&self) -> impl Iterator<Item = &CellAddress> {
        self.cells
            .iter()
            .filter(|(_, c)| !matches!(c, Compiled::Constant(_)))
            .map(|(a, _)| a)
    }

    pub fn set_constant(&mut self, addr: CellAddress, value: Value) {
        self.cells.insert(addr, Compiled::Constant(value));
    }

    /// Evaluates every cell in dependency order. Cells on a reference cycle
    /// become `#CYCLE!`; references into unknown sheets read `#REF!`.
    pub fn evaluate(&self) -> ValueGrid {
        let mut grid = ValueGrid::default();
        let mut graph: DiGraph<&CellAddress, ()> = DiGraph::new();
        let mut index: HashMap<&CellAddress, NodeIndex> = HashMap::new();

        for (addr, compiled) in &self.cells {
            match compiled {
                Compiled::Constant(v) => grid.set(addr.clone(), v.clone()),
                Compiled::Invalid => grid.set(addr.clone(), Value::Error(ErrorKind::BadValue)),
                Compiled::Formula { .. } => {
                    index.insert(addr, graph.add_node(addr));
                }
            }
        }
        for (addr, compiled) in &self.cells {
            if let Compiled::Formula { refs, .. } = compiled {
                let from = index[addr];
                for r in refs {
                    if let Some(&to) = index.get(r) {
                        graph.add_edge(from, to, ());
                    } else if !grid.values.contains_key(r) {
                        let v = if self.sheets.contains(&r.sheet) {
                            Value::Blank
                        } else {
                            Value::Error(ErrorKind::BadRef)
                        };
                        grid.set(r.clone(), v);
                    }
                }
            }
        }

        // components come out dependencies-first
        for component in tarjan_scc(&graph) {
            let cyclic = component.len() > 1 || graph.contains_edge(component[0], component[0]);
            for node in component {
                let addr = graph[node];
                let value = if cyclic {
                    Value::Error(ErrorKind::Cycle)
                } else {
                    match &self.cells[addr] {
                        Compiled::Formula { ast, .. } => {
                            let lookup = |a: &CellAddress| self.read(&grid, a);
                            eval_formula(ast, &addr.sheet, &lookup)
                        }
                        _ => unreachable!("only formulas are graph nodes"),
                    }
                };
                grid.set(addr.clone(), value);
            }
        }
        grid
    }

    fn read(&self, grid: &ValueGrid, addr: &CellAddress) -> Value {
        if !self.sheets.contains(&addr.sheet) {
            return Value::Error(ErrorKind::BadRef);
        }
        grid.get(addr)
    }
}

/// Evaluates a workbook. Unparseable formulas evaluate to `#VALUE!`; run
/// the syntax check first to report them properly.
pub fn evaluate(wb: &Workbook) -> ValueGrid {
    Program::compile(wb).evaluate()
}
