use std::cmp::Ordering;

use super::ast::{BinaryOp, FormulaAst, Function, UnaryOp};
use super::{expand_range, CapacityError, DEFAULT_RANGE_LIMIT};

/// Value-preserving normal form used for comparing formulas.
///
/// Rewrites, applied until nothing changes:
/// - `AVG(a, ..)` becomes `(a + ..) / n` with ranges expanded to cells and `n`
///   the static operand count;
/// - `SUM(a, ..)` becomes `a + ..`;
/// - operands of maximal `+` and `*` chains are sorted (references row-major,
///   then literals by value, then compound terms by printed form) and rebuilt
///   left-associatively;
/// - `--x` becomes `x`.
///
/// No constant folding is done.
pub fn canonicalize(ast: &FormulaAst) -> Result<FormulaAst, CapacityError> {
    let mut current = ast.clone();
    // each pass is itself close to a fixpoint; the bound only guards against surprises
    for _ in 0..16 {
        let next = pass(&current)?;
        if next == current {
            return Ok(next);
        }
        current = next;
    }
    Ok(current)
}

fn pass(ast: &FormulaAst) -> Result<FormulaAst, CapacityError> {
    Ok(match ast {
        FormulaAst::Call(Function::Avg, args) if !args.is_empty() => {
            let operands = spread(args)?;
            let count = operands.len() as f64;
            FormulaAst::binary(BinaryOp::Div, sorted_chain(BinaryOp::Add, operands), FormulaAst::Number(count))
        }
        FormulaAst::Call(Function::Sum, args) if !args.is_empty() => {
            sorted_chain(BinaryOp::Add, spread(args)?)
        }
        FormulaAst::Call(f, args) => {
            FormulaAst::Call(*f, args.iter().map(pass).collect::<Result<_, _>>()?)
        }
        FormulaAst::Unary(UnaryOp::Neg, inner) => match inner.as_ref() {
            FormulaAst::Unary(UnaryOp::Neg, x) => pass(x)?,
            other => FormulaAst::unary(UnaryOp::Neg, pass(other)?),
        },
        FormulaAst::Unary(op, inner) => FormulaAst::unary(*op, pass(inner)?),
        FormulaAst::Binary(op @ (BinaryOp::Add | BinaryOp::Mul), _, _) => {
            let mut operands = Vec::new();
            flatten(ast, *op, &mut operands);
            let operands = operands.into_iter().map(pass).collect::<Result<Vec<_>, _>>()?;
            sorted_chain(*op, operands)
        }
        FormulaAst::Binary(op, l, r) => FormulaAst::binary(*op, pass(l)?, pass(r)?),
        leaf => leaf.clone(),
    })
}

/// Aggregate arguments as a flat operand list, ranges expanded.
fn spread(args: &[FormulaAst]) -> Result<Vec<FormulaAst>, CapacityError> {
    let mut out = Vec::new();
    for arg in args {
        match arg {
            FormulaAst::Range(a, b) => {
                out.extend(expand_range(a, b, DEFAULT_RANGE_LIMIT)?.into_iter().map(FormulaAst::Ref))
            }
            other => out.push(pass(other)?),
        }
    }
    Ok(out)
}

fn flatten<'a>(ast: &'a FormulaAst, op: BinaryOp, out: &mut Vec<&'a FormulaAst>) {
    match ast {
        FormulaAst::Binary(o, l, r) if *o == op => {
            flatten(l, op, out);
            flatten(r, op, out);
        }
        other => out.push(other),
    }
}

fn sorted_chain(op: BinaryOp, operands: Vec<FormulaAst>) -> FormulaAst {
    // operands that are themselves chains of the same operator join the outer chain
    let mut flat = Vec::with_capacity(operands.len());
    for operand in &operands {
        let mut parts = Vec::new();
        flatten(operand, op, &mut parts);
        flat.extend(parts.into_iter().cloned());
    }
    flat.sort_by(operand_order);
    let mut iter = flat.into_iter();
    let first = iter.next().expect("chains have at least one operand");
    iter.fold(first, |acc, next| FormulaAst::binary(op, acc, next))
}

fn rank(node: &FormulaAst) -> u8 {
    match node {
        FormulaAst::Ref(_) => 0,
        FormulaAst::Range(..) => 1,
        FormulaAst::Number(_) => 2,
        FormulaAst::Text(_) => 3,
        FormulaAst::Bool(_) => 4,
        _ => 5,
    }
}

fn operand_order(a: &FormulaAst, b: &FormulaAst) -> Ordering {
    rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
        (FormulaAst::Ref(x), FormulaAst::Ref(y)) => ref_order(x, y),
        (FormulaAst::Range(x1, x2), FormulaAst::Range(y1, y2)) => {
            ref_order(x1, y1).then_with(|| ref_order(x2, y2))
        }
        (FormulaAst::Number(x), FormulaAst::Number(y)) => x.total_cmp(y),
        (FormulaAst::Text(x), FormulaAst::Text(y)) => x.cmp(y),
        (FormulaAst::Bool(x), FormulaAst::Bool(y)) => x.cmp(y),
        _ => a.to_string().cmp(&b.to_string()),
    })
}

fn ref_order(x: &super::CellRef, y: &super::CellRef) -> Ordering {
    x.sheet
        .cmp(&y.sheet)
        .then(x.row.cmp(&y.row))
        .then(x.column.cmp(&y.column))
        .then(x.col_absolute.cmp(&y.col_absolute))
        .then(x.row_absolute.cmp(&y.row_absolute))
}

#[cfg(test)]
mod tests {
    use super::super::{parse_formula, references_of};
    use super::*;

    fn canon(src: &str) -> String {
        canonicalize(&parse_formula(src).unwrap()).unwrap().to_formula()
    }

    #[test]
    fn avg_matches_manual_average() {
        assert_eq!(canon("=AVG(C3:C5)"), canon("=(C3+C4+C5)/3"));
        assert_eq!(canon("=AVERAGE(C5,C3:C4)"), "=(C3+C4+C5)/3");
        assert_eq!(canon("=SUM(B3:B5)/3"), canon("=AVG(B3:B5)"));
    }

    #[test]
    fn already_canonical_is_fixpoint() {
        assert_eq!(canon("=(B3+B4+B5)/3"), "=(B3+B4+B5)/3");
        assert_eq!(canon("=(B3-C3)/2"), "=(B3-C3)/2");
    }

    #[test]
    fn no_constant_folding() {
        assert_eq!(canon("=SUM(A1:A2)+0"), "=A1+A2+0");
        let direct = canonicalize(&parse_formula("=SUM(A1:A2)+0").unwrap()).unwrap();
        let manual = parse_formula("=(A1+A2)+0").unwrap();
        assert_eq!(direct, manual);
    }

    #[test]
    fn commutative_ordering() {
        assert_eq!(canon("=2+B1+A1*3+A1"), "=A1+B1+2+A1*3");
        assert_eq!(canon("=C1*A1*B1"), "=A1*B1*C1");
        assert_eq!(canon("=(C1+B1)-(B2+A2)"), "=B1+C1-(A2+B2)");
    }

    #[test]
    fn double_negation() {
        assert_eq!(canon("=--A1"), "=A1");
        assert_eq!(canon("=---A1"), "=-A1");
    }

    #[test]
    fn nested_aggregates_and_functions() {
        assert_eq!(canon("=SUM(A2,SUM(A1,B1))"), "=A1+B1+A2");
        assert_eq!(canon("=ROUND(SUM(A1:A4);2)"), "=ROUND(A1+A2+A3+A4,2)");
        assert_eq!(canon("=MAX(B1:B2,A1)"), "=MAX(B1:B2,A1)");
        assert_eq!(canon("=AVG()"), "=AVG()");
    }

    #[test]
    fn idempotent_and_reference_preserving() {
        for src in [
            "=AVG(C3:C5)*2+SUM(A1,B$2)",
            "=IF(A1>SUM(B1:B3),--C1,AVG(D1,D2)^2)",
            "=(A1+B1)*(B1+A1)",
        ] {
            let ast = parse_formula(src).unwrap();
            let once = canonicalize(&ast).unwrap();
            assert_eq!(canonicalize(&once).unwrap(), once, "{src}");
            let before: std::collections::BTreeSet<_> = references_of(&ast, "S").unwrap().into_iter().collect();
            let after: std::collections::BTreeSet<_> = references_of(&once, "S").unwrap().into_iter().collect();
            assert_eq!(before, after, "{src}");
        }
    }
}
