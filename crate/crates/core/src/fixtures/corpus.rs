//! Randomized corpus: fully populated acyclic workbooks plus single-site
//! formula mutations, reproducible from a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formula::{BinaryOp, CellRef, FormulaAst, Function, UnaryOp};
use crate::model::{CellAddress, CellContent, Value, Workbook};

pub const SHEET: &str = "S";

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_rows: u32,
    pub max_cols: u32,
    pub max_depth: u32,
}

pub const SMALL: Shape = Shape { max_rows: 5, max_cols: 5, max_depth: 3 };
pub const LARGE: Shape = Shape { max_rows: 8, max_cols: 8, max_depth: 3 };

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    cols: u32,
    /// Current cell; only cells before it in row-major order may be referenced.
    row: u32,
    col: u32,
}

impl Gen<'_> {
    fn earlier_count(&self) -> u32 {
        (self.row - 1) * self.cols + (self.col - 1)
    }

    fn number(&mut self) -> FormulaAst {
        FormulaAst::Number(self.rng.random_range(0..=40) as f64 / 2.0)
    }

    fn reference(&mut self) -> FormulaAst {
        let k = self.rng.random_range(0..self.earlier_count());
        let mut r = CellRef::relative(k % self.cols + 1, k / self.cols + 1);
        if self.rng.random_bool(0.1) {
            r.col_absolute = true;
            r.row_absolute = true;
        }
        FormulaAst::Ref(r)
    }

    fn leaf(&mut self) -> FormulaAst {
        if self.rng.random_bool(0.75) {
            self.reference()
        } else {
            self.number()
        }
    }

    /// A rectangle of strictly earlier cells, or a single reference.
    fn range(&mut self) -> FormulaAst {
        if self.row > 1 {
            let r2 = self.rng.random_range(1..self.row);
            let r1 = self.rng.random_range(1..=r2);
            let c2 = self.rng.random_range(1..=self.cols);
            let c1 = self.rng.random_range(1..=c2);
            FormulaAst::Range(CellRef::relative(c1, r1), CellRef::relative(c2, r2))
        } else if self.col > 2 {
            let c2 = self.rng.random_range(1..self.col);
            let c1 = self.rng.random_range(1..=c2);
            FormulaAst::Range(CellRef::relative(c1, 1), CellRef::relative(c2, 1))
        } else {
            self.reference()
        }
    }

    fn expr(&mut self, depth: u32) -> FormulaAst {
        if depth == 0 || self.rng.random_bool(0.3) {
            return self.leaf();
        }
        let d = depth - 1;
        match self.rng.random_range(0..10) {
            0..=3 => {
                let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div][self.rng.random_range(0..4)];
                FormulaAst::binary(op, self.expr(d), self.expr(d))
            }
            4 | 5 => {
                let f = [Function::Sum, Function::Avg, Function::Min, Function::Max, Function::Count]
                    [self.rng.random_range(0..5)];
                let n = self.rng.random_range(1..=3);
                let args = (0..n)
                    .map(|_| if self.rng.random_bool(0.5) { self.range() } else { self.expr(d) })
                    .collect();
                FormulaAst::Call(f, args)
            }
            6 => FormulaAst::Call(Function::Abs, vec![self.expr(d)]),
            7 => {
                let digits = FormulaAst::Number(self.rng.random_range(0..=2) as f64);
                FormulaAst::Call(Function::Round, vec![self.expr(d), digits])
            }
            8 => {
                let op = [BinaryOp::Lt, BinaryOp::Ge, BinaryOp::Eq, BinaryOp::Ne][self.rng.random_range(0..4)];
                let cond = FormulaAst::binary(op, self.expr(d.saturating_sub(1)), self.expr(d.saturating_sub(1)));
                FormulaAst::Call(Function::If, vec![cond, self.expr(d), self.expr(d)])
            }
            _ => FormulaAst::unary(UnaryOp::Neg, self.expr(d)),
        }
    }
}

/// A fully populated acyclic workbook: numbers and formulas that only
/// reference earlier cells (row-major).
pub fn random_workbook(seed: u64, shape: Shape) -> Workbook {
    let mut rng = rng(seed);
    let rows = rng.random_range(1..=shape.max_rows);
    let cols = rng.random_range(if rows == 1 { 2 } else { 1 }..=shape.max_cols);
    let mut wb = Workbook::new(format!("random-{seed}"));
    for row in 1..=rows {
        for col in 1..=cols {
            let addr = CellAddress::new(SHEET, col, row);
            let mut g = Gen { rng: &mut rng, cols, row, col };
            let content = if (row, col) == (1, 1) || g.rng.random_bool(0.35) {
                match g.number() {
                    FormulaAst::Number(n) => CellContent::Constant(Value::Number(n)),
                    _ => unreachable!(),
                }
            } else {
                let depth = g.rng.random_range(1..=shape.max_depth);
                CellContent::Formula(g.expr(depth).to_formula())
            };
            wb.set(addr, content);
        }
    }
    wb
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    Operator,
    Constant,
    Reference,
}

/// Applies one random mutation to a formula: swap an arithmetic operator,
/// bump a literal, or redirect a single reference to another earlier cell.
pub fn mutate(ast: &FormulaAst, home: &CellAddress, cols: u32, rng: &mut ChaCha8Rng) -> Option<(FormulaAst, MutationKind)> {
    let mut sites = Vec::new();
    let mut index = 0usize;
    ast.walk(&mut |n| {
        match n {
            FormulaAst::Binary(BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div, ..) => {
                sites.push((index, MutationKind::Operator))
            }
            FormulaAst::Number(_) => sites.push((index, MutationKind::Constant)),
            FormulaAst::Ref(_) => sites.push((index, MutationKind::Reference)),
            _ => {}
        }
        index += 1;
    });
    if sites.is_empty() {
        return None;
    }
    let (target, kind) = sites[rng.random_range(0..sites.len())];
    let earlier = (home.row - 1) * cols + (home.column - 1);
    let replacement_ref = rng.random_range(0..earlier.max(1));
    let mut counter = 0usize;
    let mutated = rewrite(ast, &mut counter, target, &mut |node| match node {
        FormulaAst::Binary(op, l, r) => {
            let swapped = match op {
                BinaryOp::Add => BinaryOp::Sub,
                BinaryOp::Sub => BinaryOp::Add,
                BinaryOp::Mul => BinaryOp::Div,
                _ => BinaryOp::Mul,
            };
            FormulaAst::Binary(swapped, l.clone(), r.clone())
        }
        FormulaAst::Number(n) => FormulaAst::Number(n + 1.0),
        FormulaAst::Ref(r) => {
            let mut k = replacement_ref;
            let current = (r.row - 1) * cols + (r.column - 1);
            if k == current {
                k = (k + 1) % earlier.max(1);
            }
            FormulaAst::Ref(CellRef::relative(k % cols + 1, k / cols + 1))
        }
        other => other.clone(),
    });
    (mutated != *ast).then_some((mutated, kind))
}

fn rewrite(
    ast: &FormulaAst,
    counter: &mut usize,
    target: usize,
    f: &mut dyn FnMut(&FormulaAst) -> FormulaAst,
) -> FormulaAst {
    let here = *counter;
    *counter += 1;
    if here == target {
        // children keep their numbering so later sites stay addressable
        let mut skip = 0usize;
        ast.walk(&mut |_| skip += 1);
        *counter = here + skip;
        return f(ast);
    }
    match ast {
        FormulaAst::Unary(op, x) => FormulaAst::unary(*op, rewrite(x, counter, target, f)),
        FormulaAst::Binary(op, l, r) => {
            let l = rewrite(l, counter, target, f);
            let r = rewrite(r, counter, target, f);
            FormulaAst::binary(*op, l, r)
        }
        FormulaAst::Call(func, args) => {
            FormulaAst::Call(*func, args.iter().map(|a| rewrite(a, counter, target, f)).collect())
        }
        FormulaAst::Range(..) => {
            // ranges count as one node in walk order
            ast.clone()
        }
        other => other.clone(),
    }
}

pub fn with_formula(wb: &Workbook, cell: &CellAddress, ast: &FormulaAst) -> Workbook {
    let mut out = wb.clone();
    out.set(cell.clone(), CellContent::Formula(ast.to_formula()));
    out
}

pub fn columns(wb: &Workbook) -> u32 {
    wb.cells().map(|(a, _)| a.column).max().unwrap_or(1)
}
