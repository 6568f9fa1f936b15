//! Formula diagnosis for cells that value matching marked as formula errors.
//!
//! Both formulas are canonicalized, then compared as bags in a fixed order:
//! operators and functions, then references, then constants. The first
//! stage that finds a difference decides the category.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eval::Tolerance;
use crate::formula::{canonicalize, expand_range, format_number, parse_formula, BinaryOp, CellRef, FormulaAst, Function, UnaryOp, DEFAULT_RANGE_LIMIT};
use crate::model::{CellAddress, CellContent, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Operator,
    Function,
    Reference,
    Constant,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Operator,
    Function,
    Reference,
    Constant,
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItemKind::Operator => "operator",
            ItemKind::Function => "function",
            ItemKind::Reference => "reference",
            ItemKind::Constant => "constant",
        })
    }
}

/// Something the submission has that the solution does not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extra {
    pub kind: ItemKind,
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spelling {
    pub found: String,
    pub expected: String,
}

/// A concrete repair suggestion, rendered into feedback messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Hint {
    /// The solution uses this item and the submission lacks it.
    Use { kind: ItemKind, fragment: String },
    /// Same cell, different `$` anchoring.
    Anchoring { expected: String, found: String },
    /// The submission holds a value where a formula is expected.
    FormulaExpected { top: String },
    /// No stage found a difference.
    Unclassified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDetail {
    pub cell: CellAddress,
    pub category: Category,
    /// Solution fragments the submission is missing, in the solution's notation.
    pub expected: Vec<String>,
    /// Submission fragments that stand where the expected ones belong.
    pub found: Vec<String>,
    pub extras: Vec<Extra>,
    pub spelling: Option<Spelling>,
    pub hints: Vec<Hint>,
}

impl ErrorDetail {
    fn new(cell: &CellAddress, category: Category) -> Self {
        Self {
            cell: cell.clone(),
            category,
            expected: Vec::new(),
            found: Vec::new(),
            extras: Vec::new(),
            spelling: None,
            hints: Vec::new(),
        }
    }

    fn push_expected(&mut self, kind: ItemKind, fragment: String) {
        if !self.expected.contains(&fragment) {
            self.expected.push(fragment.clone());
            self.hints.push(Hint::Use { kind, fragment });
        }
    }

    fn push_found(&mut self, fragment: String) {
        if !self.found.contains(&fragment) {
            self.found.push(fragment);
        }
    }

    fn push_extra(&mut self, kind: ItemKind, name: String) {
        if self.extras.iter().any(|e| e.kind == kind && e.name == name) {
            return;
        }
        let cell = self.cell.a1();
        let message = match kind {
            ItemKind::Reference | ItemKind::Constant => format!("The {kind} {name} is used too often in cell {cell}."),
            _ => format!("The {kind} '{name}' is used too often in cell {cell}."),
        };
        self.extras.push(Extra { kind, name, message });
    }
}

/// Spelling suggestion for two texts: present when they differ by at most
/// `max(1, ceil(len(expected) / 4))` edits.
pub fn spelling_hint(found: &str, expected: &str) -> Option<Spelling> {
    if found == expected {
        return None;
    }
    let threshold = expected.chars().count().div_ceil(4).max(1);
    (strsim::levenshtein(found, expected) <= threshold).then(|| Spelling {
        found: found.to_string(),
        expected: expected.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum OpItem {
    Binary(BinaryOp),
    Unary(UnaryOp),
}

impl OpItem {
    fn symbol(self) -> &'static str {
        match self {
            OpItem::Binary(op) => op.symbol(),
            OpItem::Unary(UnaryOp::Neg) => "-",
            OpItem::Unary(UnaryOp::Pos) => "+",
        }
    }
}

#[derive(Debug, Clone)]
struct RefItem {
    addr: CellAddress,
    col_absolute: bool,
    row_absolute: bool,
    written: CellRef,
}

impl RefItem {
    fn key(&self) -> (&CellAddress, bool, bool) {
        (&self.addr, self.col_absolute, self.row_absolute)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ConstItem {
    Number(f64),
    Text(String),
    Bool(bool),
}

impl ConstItem {
    fn render(&self) -> String {
        match self {
            ConstItem::Number(n) => format_number(*n),
            ConstItem::Text(s) => format!("\"{s}\""),
            ConstItem::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        }
    }

    fn matches(&self, other: &ConstItem, tolerance: &Tolerance) -> bool {
        match (self, other) {
            (ConstItem::Number(a), ConstItem::Number(b)) => tolerance.numbers_equal(*a, *b),
            _ => self == other,
        }
    }
}

#[derive(Default)]
struct Inventory {
    ops: Vec<OpItem>,
    funcs: Vec<Function>,
    refs: Vec<RefItem>,
    consts: Vec<ConstItem>,
}

fn inventory(ast: &FormulaAst, home: &str) -> Inventory {
    let mut inv = Inventory::default();
    ast.walk(&mut |node| match node {
        FormulaAst::Number(n) => inv.consts.push(ConstItem::Number(*n)),
        FormulaAst::Text(s) => inv.consts.push(ConstItem::Text(s.clone())),
        FormulaAst::Bool(b) => inv.consts.push(ConstItem::Bool(*b)),
        FormulaAst::Ref(r) => inv.refs.push(ref_item(r, home)),
        FormulaAst::Range(a, b) => {
            if let Ok(cells) = expand_range(a, b, DEFAULT_RANGE_LIMIT) {
                inv.refs.extend(cells.iter().map(|c| ref_item(c, home)));
            }
        }
        FormulaAst::Unary(op, _) => inv.ops.push(OpItem::Unary(*op)),
        FormulaAst::Binary(op, ..) => inv.ops.push(OpItem::Binary(*op)),
        FormulaAst::Call(f, _) => inv.funcs.push(*f),
    });
    inv.ops.sort();
    inv.funcs.sort();
    inv.refs.sort_by(|a, b| a.key().cmp(&b.key()));
    inv
}

fn ref_item(r: &CellRef, home: &str) -> RefItem {
    RefItem {
        addr: r.resolve(home),
        col_absolute: r.col_absolute,
        row_absolute: r.row_absolute,
        written: r.clone(),
    }
}

/// Bag difference of two sorted lists: (solution-only, submission-only).
fn bag_diff<T: Clone>(solution: &[T], submission: &[T], same: impl Fn(&T, &T) -> bool) -> (Vec<T>, Vec<T>) {
    let mut used = vec![false; submission.len()];
    let mut missing = Vec::new();
    for s in solution {
        match (0..submission.len()).find(|&i| !used[i] && same(s, &submission[i])) {
            Some(i) => used[i] = true,
            None => missing.push(s.clone()),
        }
    }
    let surplus = submission
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(x, _)| x.clone())
        .collect();
    (missing, surplus)
}

/// Finds how the solution wrote the reference covering `addr`: the range
/// itself when it came from a range, otherwise the single reference.
fn original_notation(original: &FormulaAst, home: &str, item: &RefItem) -> String {
    let mut found = None;
    original.walk(&mut |node| {
        if found.is_some() {
            return;
        }
        match node {
            FormulaAst::Ref(r) if r.resolve(home) == item.addr => found = Some(r.to_string()),
            FormulaAst::Range(a, b) => {
                let (s, e) = (a.resolve(home), b.resolve(home));
                if s.sheet == item.addr.sheet
                    && (s.column..=e.column).contains(&item.addr.column)
                    && (s.row..=e.row).contains(&item.addr.row)
                {
                    found = Some(node.to_string());
                }
            }
            _ => {}
        }
    });
    found.unwrap_or_else(|| item.written.to_string())
}

fn top_symbol(ast: &FormulaAst) -> String {
    match ast {
        FormulaAst::Call(f, _) => f.name().to_string(),
        FormulaAst::Binary(op, ..) => op.symbol().to_string(),
        FormulaAst::Unary(op, _) => OpItem::Unary(*op).symbol().to_string(),
        other => other.to_string(),
    }
}

fn render_content(content: Option<&CellContent>) -> String {
    match content {
        None => String::new(),
        Some(CellContent::Formula(src)) => src.clone(),
        Some(CellContent::Constant(v)) => render_value(v),
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::Text(s) => format!("\"{s}\""),
        other => other.to_string(),
    }
}

fn parse_content(content: Option<&CellContent>) -> Option<FormulaAst> {
    match content {
        Some(CellContent::Formula(src)) => parse_formula(src).ok(),
        _ => None,
    }
}

/// Classifies why a formula-error cell is wrong and what would fix it.
pub fn diff_formula(
    cell: &CellAddress,
    solution: Option<&CellContent>,
    submission: Option<&CellContent>,
    tolerance: &Tolerance,
) -> ErrorDetail {
    let home = cell.sheet.as_str();
    let Some(sol_ast) = parse_content(solution) else {
        // the solution holds a plain value here
        let expected = match solution {
            Some(CellContent::Constant(v)) => v.clone(),
            _ => Value::Blank,
        };
        let mut detail = ErrorDetail::new(cell, Category::Constant);
        detail.push_expected(ItemKind::Constant, render_value(&expected));
        let found = render_content(submission);
        if !found.is_empty() {
            detail.push_found(found);
        }
        if let (Value::Text(exp), Some(CellContent::Constant(Value::Text(got)))) = (&expected, submission) {
            detail.spelling = spelling_hint(got, exp);
        }
        return detail;
    };
    let Some(sub_ast) = parse_content(submission) else {
        let mut detail = ErrorDetail::new(cell, Category::Function);
        let top = top_symbol(&sol_ast);
        detail.expected.push(top.clone());
        let found = render_content(submission);
        if !found.is_empty() {
            detail.push_found(found);
        }
        detail.hints.push(Hint::FormulaExpected { top });
        return detail;
    };

    let sol_canon = canonicalize(&sol_ast).unwrap_or_else(|_| sol_ast.clone());
    let sub_canon = canonicalize(&sub_ast).unwrap_or_else(|_| sub_ast.clone());
    let sol = inventory(&sol_canon, home);
    let sub = inventory(&sub_canon, home);

    // operators and functions
    let (missing_funcs, surplus_funcs) = bag_diff(&sol.funcs, &sub.funcs, |a, b| a == b);
    let (missing_ops, surplus_ops) = bag_diff(&sol.ops, &sub.ops, |a, b| a == b);
    let funcs_differ = !missing_funcs.is_empty() || !surplus_funcs.is_empty();
    if funcs_differ || !missing_ops.is_empty() || !surplus_ops.is_empty() {
        let category = if funcs_differ { Category::Function } else { Category::Operator };
        let mut detail = ErrorDetail::new(cell, category);
        pair_up(
            &mut detail,
            ItemKind::Function,
            missing_funcs.iter().map(|f| f.name().to_string()).collect(),
            surplus_funcs.iter().map(|f| f.name().to_string()).collect(),
        );
        pair_up(
            &mut detail,
            ItemKind::Operator,
            missing_ops.iter().map(|o| o.symbol().to_string()).collect(),
            surplus_ops.iter().map(|o| o.symbol().to_string()).collect(),
        );
        return detail;
    }

    // references, including `$` anchoring
    let (missing_refs, surplus_refs) = bag_diff(&sol.refs, &sub.refs, |a, b| a.key() == b.key());
    if !missing_refs.is_empty() || !surplus_refs.is_empty() {
        let mut detail = ErrorDetail::new(cell, Category::Reference);
        let mut surplus = surplus_refs;
        let mut unpaired_missing = Vec::new();
        // anchoring-only differences pair with the same address first
        for m in missing_refs {
            if let Some(i) = surplus.iter().position(|s| s.addr == m.addr) {
                let s = surplus.remove(i);
                let expected = m.written.to_string();
                let found = s.written.to_string();
                if !detail.expected.contains(&expected) {
                    detail.expected.push(expected.clone());
                }
                detail.push_found(found.clone());
                detail.hints.push(Hint::Anchoring { expected, found });
            } else {
                unpaired_missing.push(m);
            }
        }
        let paired = unpaired_missing.len().min(surplus.len());
        for m in &unpaired_missing {
            detail.push_expected(ItemKind::Reference, original_notation(&sol_ast, home, m));
        }
        for s in &surplus[..paired] {
            detail.push_found(s.written.to_string());
        }
        for s in &surplus[paired..] {
            detail.push_extra(ItemKind::Reference, s.written.to_string());
        }
        return detail;
    }

    // constants
    let (missing_consts, surplus_consts) =
        bag_diff(&sol.consts, &sub.consts, |a, b| a.matches(b, tolerance));
    if !missing_consts.is_empty() || !surplus_consts.is_empty() {
        let mut detail = ErrorDetail::new(cell, Category::Constant);
        for (m, s) in missing_consts.iter().zip(&surplus_consts) {
            if let (ConstItem::Text(exp), ConstItem::Text(got)) = (m, s) {
                if detail.spelling.is_none() {
                    detail.spelling = spelling_hint(got, exp);
                }
            }
        }
        pair_up(
            &mut detail,
            ItemKind::Constant,
            missing_consts.iter().map(ConstItem::render).collect(),
            surplus_consts.iter().map(ConstItem::render).collect(),
        );
        return detail;
    }

    let mut detail = ErrorDetail::new(cell, Category::Unclassified);
    detail.hints.push(Hint::Unclassified);
    detail
}

/// Pairs missing with surplus items in order; leftovers on the submission
/// side are reported as used too often.
fn pair_up(detail: &mut ErrorDetail, kind: ItemKind, missing: Vec<String>, surplus: Vec<String>) {
    let paired = missing.len().min(surplus.len());
    for m in missing {
        detail.push_expected(kind, m);
    }
    let mut seen = BTreeSet::new();
    for (i, s) in surplus.into_iter().enumerate() {
        if i < paired {
            detail.push_found(s);
        } else if seen.insert(s.clone()) {
            detail.push_extra(kind, s);
        }
    }
}
