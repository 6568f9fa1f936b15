use crate::formula::{format_number, BinaryOp, Function, UnaryOp};
use crate::model::{ErrorKind, Value};

pub(crate) fn worst(a: ErrorKind, b: ErrorKind) -> ErrorKind {
    a.min(b)
}

/// Arithmetic coercion: Blank → 0, Boolean → 1/0, Text is an error.
pub(crate) fn to_number(v: &Value) -> Result<f64, ErrorKind> {
    match v {
        Value::Number(n) => Ok(*n),
        Value::Blank => Ok(0.0),
        Value::Boolean(b) => Ok(if *b { 1.0 } else { 0.0 }),
        Value::Text(_) => Err(ErrorKind::BadValue),
        Value::Error(k) => Err(*k),
    }
}

fn to_text(v: &Value) -> Result<String, ErrorKind> {
    match v {
        Value::Number(n) => Ok(format_number(*n)),
        Value::Blank => Ok(String::new()),
        Value::Boolean(true) => Ok("TRUE".into()),
        Value::Boolean(false) => Ok("FALSE".into()),
        Value::Text(s) => Ok(s.clone()),
        Value::Error(k) => Err(*k),
    }
}

fn both<T>(a: Result<T, ErrorKind>, b: Result<T, ErrorKind>) -> Result<(T, T), ErrorKind> {
    match (a, b) {
        (Ok(x), Ok(y)) => Ok((x, y)),
        (Err(x), Err(y)) => Err(worst(x, y)),
        (Err(x), _) | (_, Err(x)) => Err(x),
    }
}

pub(crate) fn apply_unary(op: UnaryOp, v: &Value) -> Value {
    match to_number(v) {
        Ok(n) => Value::number(match op {
            UnaryOp::Neg => -n,
            UnaryOp::Pos => n,
        }),
        Err(k) => Value::Error(k),
    }
}

pub(crate) fn apply_binary(op: BinaryOp, a: &Value, b: &Value) -> Value {
    let arith = |f: fn(f64, f64) -> Value| match both(to_number(a), to_number(b)) {
        Ok((x, y)) => f(x, y),
        Err(k) => Value::Error(k),
    };
    match op {
        BinaryOp::Add => arith(|x, y| Value::number(x + y)),
        BinaryOp::Sub => arith(|x, y| Value::number(x - y)),
        BinaryOp::Mul => arith(|x, y| Value::number(x * y)),
        BinaryOp::Div => arith(|x, y| {
            if y == 0.0 {
                Value::Error(ErrorKind::DivZero)
            } else {
                Value::number(x / y)
            }
        }),
        BinaryOp::Pow => arith(|x, y| {
            if x == 0.0 && y < 0.0 {
                Value::Error(ErrorKind::DivZero)
            } else {
                Value::number(x.powf(y))
            }
        }),
        BinaryOp::Concat => match both(to_text(a), to_text(b)) {
            Ok((x, y)) => Value::Text(x + &y),
            Err(k) => Value::Error(k),
        },
        BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            compare(op, a, b)
        }
    }
}

/// Type rank for cross-type ordering: numbers < text < booleans.
fn type_rank(v: &Value) -> u8 {
    match v {
        Value::Number(_) | Value::Blank => 0,
        Value::Text(_) => 1,
        _ => 2,
    }
}

fn compare(op: BinaryOp, a: &Value, b: &Value) -> Value {
    use std::cmp::Ordering;
    match (a, b) {
        (Value::Error(x), Value::Error(y)) => return Value::Error(worst(*x, *y)),
        (Value::Error(x), _) | (_, Value::Error(x)) => return Value::Error(*x),
        _ => {}
    }
    // a blank takes the neutral value of the other side's type
    let blank_as = |other: &Value| match other {
        Value::Text(_) => Value::Text(String::new()),
        Value::Boolean(_) => Value::Boolean(false),
        _ => Value::Number(0.0),
    };
    let a = if *a == Value::Blank { blank_as(b) } else { a.clone() };
    let b = if *b == Value::Blank { blank_as(&a) } else { b.clone() };
    let ord = match (&a, &b) {
        (Value::Number(x), Value::Number(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
        (Value::Text(x), Value::Text(y)) => x.to_lowercase().cmp(&y.to_lowercase()),
        (Value::Boolean(x), Value::Boolean(y)) => x.cmp(y),
        _ => type_rank(&a).cmp(&type_rank(&b)),
    };
    Value::Boolean(match op {
        BinaryOp::Eq => ord == Ordering::Equal,
        BinaryOp::Ne => ord != Ordering::Equal,
        BinaryOp::Lt => ord == Ordering::Less,
        BinaryOp::Le => ord != Ordering::Greater,
        BinaryOp::Gt => ord == Ordering::Greater,
        _ => ord != Ordering::Less,
    })
}

/// Numeric operands of an aggregate: Blank and Text are skipped, Booleans
/// count as 1/0, any error wins (most severe first).
fn numeric_operands(args: &[Value]) -> Result<Vec<f64>, ErrorKind> {
    let mut out = Vec::with_capacity(args.len());
    let mut error: Option<ErrorKind> = None;
    for v in args {
        match v {
            Value::Number(n) => out.push(*n),
            Value::Boolean(b) => out.push(if *b { 1.0 } else { 0.0 }),
            Value::Blank | Value::Text(_) => {}
            Value::Error(k) => error = Some(error.map_or(*k, |e| worst(e, *k))),
        }
    }
    match error {
        Some(k) => Err(k),
        None => Ok(out),
    }
}

fn round_half_away(x: f64, digits: f64) -> Value {
    let digits = digits.trunc();
    if digits.abs() > 300.0 {
        return Value::Error(ErrorKind::BadValue);
    }
    let scale = 10f64.powf(digits);
    let scaled = x * scale;
    let magnitude = scaled.abs();
    let floor = magnitude.floor();
    // treat representation noise around .5 as an exact half (2.675 → 2.68)
    let frac = magnitude - floor;
    let rounded = if (frac - 0.5).abs() <= 1e-9 * magnitude.max(1.0) || frac > 0.5 {
        floor + 1.0
    } else {
        floor
    };
    Value::number(rounded.copysign(scaled) / scale)
}

/// Applies a built-in function to already evaluated arguments. Aggregate
/// functions receive range arguments expanded into their cell values.
pub fn apply_function(func: Function, args: &[Value]) -> Value {
    let bad = Value::Error(ErrorKind::BadValue);
    match func {
        Function::Sum | Function::Avg | Function::Min | Function::Max => {
            if args.is_empty() {
                return bad;
            }
            let nums = match numeric_operands(args) {
                Ok(n) => n,
                Err(k) => return Value::Error(k),
            };
            match func {
                Function::Sum => Value::number(nums.iter().sum()),
                Function::Avg if nums.is_empty() => Value::Error(ErrorKind::DivZero),
                Function::Avg => Value::number(nums.iter().sum::<f64>() / nums.len() as f64),
                _ if nums.is_empty() => bad,
                Function::Min => Value::number(nums.iter().copied().fold(f64::INFINITY, f64::min)),
                _ => Value::number(nums.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            }
        }
        Function::Count => {
            if args.is_empty() {
                return bad;
            }
            let n = args
                .iter()
                .filter(|v| matches!(v, Value::Number(_) | Value::Boolean(_)))
                .count();
            Value::Number(n as f64)
        }
        Function::If => {
            if !(2..=3).contains(&args.len()) {
                return bad;
            }
            let cond = match &args[0] {
                Value::Boolean(b) => *b,
                Value::Number(n) => *n != 0.0,
                Value::Blank => false,
                Value::Text(_) => return bad,
                Value::Error(k) => return Value::Error(*k),
            };
            if cond {
                args[1].clone()
            } else {
                args.get(2).cloned().unwrap_or(Value::Boolean(false))
            }
        }
        Function::Round => {
            if args.len() != 2 {
                return bad;
            }
            match both(to_number(&args[0]), to_number(&args[1])) {
                Ok((x, n)) => round_half_away(x, n),
                Err(k) => Value::Error(k),
            }
        }
        Function::Abs => {
            if args.len() != 1 {
                return bad;
            }
            match to_number(&args[0]) {
                Ok(x) => Value::number(x.abs()),
                Err(k) => Value::Error(k),
            }
        }
    }
}

pub(crate) fn is_aggregate(func: Function) -> bool {
    matches!(
        func,
        Function::Sum | Function::Avg | Function::Count | Function::Min | Function::Max
    )
}
