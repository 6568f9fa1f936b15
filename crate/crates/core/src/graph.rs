//! Data dependency graph: an edge runs from each formula cell to every
//! cell its formula references.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::eval::{Program, ValueGrid};
use crate::model::{CellAddress, Value, Workbook};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dependency cycle through {}", .cells.iter().map(CellAddress::a1).collect::<Vec<_>>().join(" -> "))]
pub struct CycleError {
    /// One cycle, starting and ending at the same cell.
    pub cells: Vec<CellAddress>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DependencyGraph {
    values: BTreeMap<CellAddress, Value>,
    out: BTreeMap<CellAddress, BTreeSet<CellAddress>>,
    incoming: BTreeMap<CellAddress, BTreeSet<CellAddress>>,
}

impl DependencyGraph {
    /// Builds the graph of a workbook annotated with its evaluated values.
    /// Constants that no formula references are not part of the graph.
    pub fn build(wb: &Workbook, grid: &ValueGrid) -> Self {
        Self::from_program(&Program::compile(wb), grid)
    }

    pub fn from_program(program: &Program, grid: &ValueGrid) -> Self {
        let mut g = DependencyGraph::default();
        for cell in program.formula_cells() {
            g.ensure(cell, grid);
            for target in program.references(cell) {
                g.ensure(target, grid);
                g.out.get_mut(cell).expect("node").insert(target.clone());
                g.incoming.get_mut(target).expect("node").insert(cell.clone());
            }
        }
        g
    }

    fn ensure(&mut self, addr: &CellAddress, grid: &ValueGrid) {
        if !self.values.contains_key(addr) {
            self.values.insert(addr.clone(), grid.get(addr));
            self.out.insert(addr.clone(), BTreeSet::new());
            self.incoming.insert(addr.clone(), BTreeSet::new());
        }
    }

    /// Nodes in row-major order.
    pub fn nodes(&self) -> impl Iterator<Item = &CellAddress> {
        self.values.keys()
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(BTreeSet::len).sum()
    }

    pub fn contains(&self, addr: &CellAddress) -> bool {
        self.values.contains_key(addr)
    }

    pub fn value(&self, addr: &CellAddress) -> Option<&Value> {
        self.values.get(addr)
    }

    /// Cells referenced by `addr`, row-major.
    pub fn out_neighbors(&self, addr: &CellAddress) -> impl Iterator<Item = &CellAddress> {
        self.out.get(addr).into_iter().flatten()
    }

    /// Cells whose formulas reference `addr`, row-major.
    pub fn in_neighbors(&self, addr: &CellAddress) -> impl Iterator<Item = &CellAddress> {
        self.incoming.get(addr).into_iter().flatten()
    }

    pub fn out_degree(&self, addr: &CellAddress) -> usize {
        self.out.get(addr).map_or(0, BTreeSet::len)
    }

    pub fn in_degree(&self, addr: &CellAddress) -> usize {
        self.incoming.get(addr).map_or(0, BTreeSet::len)
    }

    /// Edges as (referrer, referenced), row-major by referrer then target.
    pub fn edges(&self) -> impl Iterator<Item = (&CellAddress, &CellAddress)> {
        self.out.iter().flat_map(|(from, tos)| tos.iter().map(move |to| (from, to)))
    }

    /// Output nodes (nothing references them) and input nodes (they
    /// reference nothing), both row-major.
    pub fn terminals(&self) -> (Vec<CellAddress>, Vec<CellAddress>) {
        let outputs = self.nodes().filter(|n| self.in_degree(n) == 0).cloned().collect();
        let inputs = self.nodes().filter(|n| self.out_degree(n) == 0).cloned().collect();
        (outputs, inputs)
    }

    /// Cells reachable from `addr` (excluding `addr` unless it lies on a cycle).
    pub fn descendants(&self, addr: &CellAddress) -> BTreeSet<CellAddress> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&CellAddress> = self.out_neighbors(addr).collect();
        while let Some(next) = stack.pop() {
            if seen.insert(next.clone()) {
                stack.extend(self.out_neighbors(next));
            }
        }
        seen
    }

    /// Length in edges of the longest directed path.
    pub fn longest_chain(&self) -> Result<usize, CycleError> {
        let mut depth: BTreeMap<&CellAddress, usize> = BTreeMap::new();
        let mut state: BTreeMap<&CellAddress, Visit> = BTreeMap::new();
        let mut best = 0;
        for root in self.nodes() {
            if state.contains_key(root) {
                continue;
            }
            // iterative post-order DFS; the stack holds (node, next child index)
            let mut stack: Vec<(&CellAddress, Vec<&CellAddress>, usize)> =
                vec![(root, self.out_neighbors(root).collect(), 0)];
            state.insert(root, Visit::Active);
            while let Some((node, children, idx)) = stack.last_mut() {
                if let Some(&child) = children.get(*idx) {
                    *idx += 1;
                    match state.get(child) {
                        Some(Visit::Active) => {
                            let start = stack.iter().position(|(n, ..)| *n == child).expect("on stack");
                            let mut cells: Vec<CellAddress> =
                                stack[start..].iter().map(|(n, ..)| (*n).clone()).collect();
                            cells.push(child.clone());
                            return Err(CycleError { cells });
                        }
                        Some(Visit::Done) => {}
                        None => {
                            state.insert(child, Visit::Active);
                            stack.push((child, self.out_neighbors(child).collect(), 0));
                        }
                    }
                } else {
                    let node = *node;
                    let d = self
                        .out_neighbors(node)
                        .map(|c| depth[c] + 1)
                        .max()
                        .unwrap_or(0);
                    best = best.max(d);
                    depth.insert(node, d);
                    state.insert(node, Visit::Done);
                    stack.pop();
                }
            }
        }
        Ok(best)
    }

    /// Longest chain that ignores edges closing a cycle, so cyclic
    /// submissions still get a length for quality metrics.
    pub fn longest_acyclic_chain(&self) -> usize {
        let mut trimmed = self.clone();
        loop {
            match trimmed.longest_chain() {
                Ok(n) => return n,
                Err(cycle) => {
                    let n = cycle.cells.len();
                    let (from, to) = (&cycle.cells[n - 2], &cycle.cells[n - 1]);
                    trimmed.out.get_mut(from).expect("node").remove(to);
                    trimmed.incoming.get_mut(to).expect("node").remove(from);
                }
            }
        }
    }

    /// Graphviz rendering: node labels are `ADDR: value`, outputs red,
    /// inputs green, numbers shown with two decimals.
    pub fn export_dot(&self) -> String {
        let home = self.nodes().next().map(|a| a.sheet.clone()).unwrap_or_default();
        let (outputs, inputs) = self.terminals();
        let outputs: BTreeSet<_> = outputs.into_iter().collect();
        let inputs: BTreeSet<_> = inputs.into_iter().collect();
        let mut dot = String::from("digraph dependencies {\n");
        if self.values.is_empty() {
            dot.push_str("}\n");
            return dot;
        }
        dot.push_str("    node [shape=ellipse];\n");
        for (addr, value) in &self.values {
            let name = addr.display_from(&home);
            let label = format!("{name}: {}", dot_value(value));
            let color = if outputs.contains(addr) {
                ", color=red, fontcolor=red"
            } else if inputs.contains(addr) {
                ", color=green, fontcolor=green"
            } else {
                ""
            };
            let _ = writeln!(dot, "    \"{}\" [label=\"{}\"{}];", escape(&name), escape(&label), color);
        }
        for (from, to) in self.edges() {
            let _ = writeln!(
                dot,
                "    \"{}\" -> \"{}\";",
                escape(&from.display_from(&home)),
                escape(&to.display_from(&home))
            );
        }
        dot.push_str("}\n");
        dot
    }
}

#[derive(Clone, Copy)]
enum Visit {
    Active,
    Done,
}

fn dot_value(v: &Value) -> String {
    match v {
        Value::Number(n) => format!("{n:.2}"),
        Value::Blank => "blank".to_string(),
        other => other.to_string(),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
