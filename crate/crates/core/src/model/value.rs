use std::fmt;

use serde::{Deserialize, Serialize};

/// Spreadsheet error values.
///
/// The declaration order doubles as the precedence used when several errors
/// meet in one operation: the smallest kind wins, so results do not depend on
/// operand order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Cycle,
    BadRef,
    DivZero,
    BadValue,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::Cycle => "#CYCLE!",
            ErrorKind::BadRef => "#REF!",
            ErrorKind::DivZero => "#DIV/0!",
            ErrorKind::BadValue => "#VALUE!",
        }
    }
}

/// An evaluated cell value. `Number` is always finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Value {
    #[default]
    Blank,
    Number(f64),
    Text(String),
    Boolean(bool),
    Error(ErrorKind),
}

impl Value {
    /// Wraps a float, mapping NaN and infinities to `#VALUE!`.
    pub fn number(n: f64) -> Value {
        if n.is_finite() {
            // normalize -0.0 so equality and printing stay stable
            Value::Number(if n == 0.0 { 0.0 } else { n })
        } else {
            Value::Error(ErrorKind::BadValue)
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Value::Error(_))
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Blank => Ok(()),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
            Value::Boolean(true) => f.write_str("TRUE"),
            Value::Boolean(false) => f.write_str("FALSE"),
            Value::Error(kind) => f.write_str(kind.code()),
        }
    }
}
