use std::fmt;

use crate::model::{column_name, quote_sheet, CellAddress};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Function {
    Sum,
    Avg,
    Count,
    Min,
    Max,
    If,
    Round,
    Abs,
}

impl Function {
    pub const ALL: [Function; 8] = [
        Function::Sum,
        Function::Avg,
        Function::Count,
        Function::Min,
        Function::Max,
        Function::If,
        Function::Round,
        Function::Abs,
    ];

    /// Case-insensitive lookup; `AVERAGE` is an alias of `AVG`.
    pub fn from_name(name: &str) -> Option<Function> {
        let upper = name.to_ascii_uppercase();
        if upper == "AVERAGE" {
            return Some(Function::Avg);
        }
        Function::ALL.into_iter().find(|f| f.name() == upper)
    }

    pub fn name(self) -> &'static str {
        match self {
            Function::Sum => "SUM",
            Function::Avg => "AVG",
            Function::Count => "COUNT",
            Function::Min => "MIN",
            Function::Max => "MAX",
            Function::If => "IF",
            Function::Round => "ROUND",
            Function::Abs => "ABS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnaryOp {
    Neg,
    Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Concat => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                PREC_CMP
            }
            BinaryOp::Concat => PREC_CONCAT,
            BinaryOp::Add | BinaryOp::Sub => PREC_ADD,
            BinaryOp::Mul | BinaryOp::Div => PREC_MUL,
            BinaryOp::Pow => PREC_POW,
        }
    }
}

const PREC_CMP: u8 = 1;
const PREC_CONCAT: u8 = 2;
const PREC_ADD: u8 = 3;
const PREC_MUL: u8 = 4;
const PREC_UNARY: u8 = 5;
const PREC_POW: u8 = 6;
const PREC_ATOM: u8 = 7;

/// A single-cell reference as written in a formula. `sheet` is `None` for
/// references to the formula's own sheet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellRef {
    pub sheet: Option<String>,
    pub column: u32,
    pub row: u32,
    pub col_absolute: bool,
    pub row_absolute: bool,
}

impl CellRef {
    pub fn relative(column: u32, row: u32) -> Self {
        Self {
            sheet: None,
            column,
            row,
            col_absolute: false,
            row_absolute: false,
        }
    }

    pub fn resolve(&self, home_sheet: &str) -> CellAddress {
        CellAddress::new(
            self.sheet.as_deref().unwrap_or(home_sheet),
            self.column,
            self.row,
        )
    }

    /// Local text with `$` markers, no sheet prefix.
    pub fn local_text(&self) -> String {
        format!(
            "{}{}{}{}",
            if self.col_absolute { "$" } else { "" },
            column_name(self.column),
            if self.row_absolute { "$" } else { "" },
            self.row
        )
    }

    fn sheet_prefix(&self) -> String {
        match &self.sheet {
            Some(s) => format!("{}!", quote_sheet(s)),
            None => String::new(),
        }
    }
}

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sheet_prefix(), self.local_text())
    }
}

/// Formula expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum FormulaAst {
    Number(f64),
    Text(String),
    Bool(bool),
    Ref(CellRef),
    /// Normalized so that `start` is the top-left corner; both ends share a sheet.
    Range(CellRef, CellRef),
    Unary(UnaryOp, Box<FormulaAst>),
    Binary(BinaryOp, Box<FormulaAst>, Box<FormulaAst>),
    Call(Function, Vec<FormulaAst>),
}

impl FormulaAst {
    pub fn binary(op: BinaryOp, left: FormulaAst, right: FormulaAst) -> Self {
        FormulaAst::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn unary(op: UnaryOp, operand: FormulaAst) -> Self {
        FormulaAst::Unary(op, Box::new(operand))
    }

    fn precedence(&self) -> u8 {
        match self {
            FormulaAst::Binary(op, ..) => op.precedence(),
            FormulaAst::Unary(..) => PREC_UNARY,
            _ => PREC_ATOM,
        }
    }

    /// Pre-order visit of every node.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a FormulaAst)) {
        visit(self);
        match self {
            FormulaAst::Unary(_, e) => e.walk(visit),
            FormulaAst::Binary(_, l, r) => {
                l.walk(visit);
                r.walk(visit);
            }
            FormulaAst::Call(_, args) => args.iter().for_each(|a| a.walk(visit)),
            _ => {}
        }
    }

    /// Formula text with a leading `=`.
    pub fn to_formula(&self) -> String {
        format!("={self}")
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

pub(crate) fn format_number(n: f64) -> String {
    format!("{n}")
}

/// Pretty-printer: minimal parentheses, uppercase function names, `,` separator.
impl fmt::Display for FormulaAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaAst::Number(n) => f.write_str(&format_number(*n)),
            FormulaAst::Text(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            FormulaAst::Bool(true) => f.write_str("TRUE"),
            FormulaAst::Bool(false) => f.write_str("FALSE"),
            FormulaAst::Ref(r) => write!(f, "{r}"),
            FormulaAst::Range(a, b) => write!(f, "{}{}:{}", a.sheet_prefix(), a.local_text(), b.local_text()),
            FormulaAst::Unary(op, e) => {
                f.write_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Pos => "+",
                })?;
                e.write_child(f, e.precedence() < PREC_UNARY)
            }
            FormulaAst::Binary(op, l, r) => {
                let p = op.precedence();
                if *op == BinaryOp::Pow {
                    l.write_child(f, l.precedence() <= PREC_POW)?;
                    f.write_str("^")?;
                    r.write_child(f, r.precedence() < PREC_UNARY)
                } else {
                    l.write_child(f, l.precedence() < p)?;
                    f.write_str(op.symbol())?;
                    r.write_child(f, r.precedence() <= p)
                }
            }
            FormulaAst::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
