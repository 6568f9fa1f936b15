//! Recursive-descent formula parser.
//!
//! ```text
//! formula    = "=" comparison
//! comparison = concat { ("=" | "<>" | "<" | "<=" | ">" | ">=") concat }
//! concat     = additive { "&" additive }
//! additive   = term { ("+" | "-") term }
//! term       = unary { ("*" | "/") unary }
//! unary      = ("-" | "+") unary | power
//! power      = primary [ "^" unary ]
//! primary    = number | string | TRUE | FALSE | reference [ ":" reference ]
//!            | name "(" [ comparison { ("," | ";") comparison } ] ")"
//!            | "(" comparison ")"
//! reference  = [ sheet "!" ] ["$"] letters ["$"] digits
//! ```

use thiserror::Error;

use super::ast::{BinaryOp, CellRef, FormulaAst, Function, UnaryOp};
use crate::model::{column_index, MAX_ROW};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownFunction,
}

/// A formula that failed to parse. `position` is a 0-based character
/// offset into the source, where the leading `=` is offset 0.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at position {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub position: usize,
}

impl ParseError {
    fn syntax(message: impl Into<String>, position: usize) -> Self {
        Self {
            kind: ParseErrorKind::Syntax,
            message: message.into(),
            position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Str(String),
    Word(String),
    QuotedSheet(String),
    Op(&'static str),
    LParen,
    RParen,
    Sep,
    Colon,
    Bang,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(chars: &[char], offset: usize) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + offset;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' | ';' => Tok::Sep,
            ':' => Tok::Colon,
            '!' => Tok::Bang,
            '+' => Tok::Op("+"),
            '-' => Tok::Op("-"),
            '*' => Tok::Op("*"),
            '/' => Tok::Op("/"),
            '^' => Tok::Op("^"),
            '&' => Tok::Op("&"),
            '=' => Tok::Op("="),
            '<' => match chars.get(i + 1) {
                Some('=') => {
                    i += 1;
                    Tok::Op("<=")
                }
                Some('>') => {
                    i += 1;
                    Tok::Op("<>")
                }
                _ => Tok::Op("<"),
            },
            '>' => match chars.get(i + 1) {
                Some('=') => {
                    i += 1;
                    Tok::Op(">=")
                }
                _ => Tok::Op(">"),
            },
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(ParseError::syntax("unterminated string", pos)),
                        Some('"') if chars.get(i + 1) == Some(&'"') => {
                            s.push('"');
                            i += 2;
                        }
                        Some('"') => break,
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(ParseError::syntax("unterminated sheet name", pos)),
                        Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => break,
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                if chars.get(i + 1) != Some(&'!') || s.is_empty() {
                    return Err(ParseError::syntax("quoted sheet name must be followed by '!'", pos));
                }
                Tok::QuotedSheet(s)
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                // a number immediately followed by letters is a malformed reference like "3D"
                if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '$') {
                    return Err(ParseError::syntax(format!("bad reference near '{text}'"), pos));
                }
                let n: f64 = text
                    .parse()
                    .map_err(|_| ParseError::syntax(format!("bad number '{text}'"), pos))?;
                out.push(Token { tok: Tok::Number(n), pos });
                continue;
            }
            c if c.is_alphabetic() || c == '_' || c == '$' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$' || chars[i] == '.')
                {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push(Token { tok: Tok::Word(word), pos });
                continue;
            }
            other => return Err(ParseError::syntax(format!("unexpected character '{other}'"), pos)),
        };
        out.push(Token { tok, pos });
        i += 1;
    }
    out.push(Token {
        tok: Tok::End,
        pos: chars.len() + offset,
    });
    Ok(out)
}

/// Parses `$A$1`-style local reference text.
fn parse_local_ref(word: &str) -> Option<CellRef> {
    let bytes = word.as_bytes();
    let mut i = 0;
    let col_absolute = bytes.first() == Some(&b'$');
    if col_absolute {
        i += 1;
    }
    let letters_start = i;
    while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
        i += 1;
    }
    let letters = &word[letters_start..i];
    let row_absolute = bytes.get(i) == Some(&b'$');
    if row_absolute {
        i += 1;
    }
    let digits = &word[i..];
    if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let column = column_index(letters)?;
    let row: u32 = digits.parse().ok()?;
    if row == 0 || row > MAX_ROW {
        return None;
    }
    Some(CellRef {
        sheet: None,
        column,
        row,
        col_absolute,
        row_absolute,
    })
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.at + ahead).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn pos(&self) -> usize {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at < self.tokens.len() - 1 {
            self.at += 1;
        }
        t
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        if let Tok::Op(op) = self.peek() {
            if let Some(found) = ops.iter().find(|o| *o == op) {
                self.bump();
                return Some(found);
            }
        }
        None
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of formula".to_string(),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(_) => "string".to_string(),
            Tok::Word(w) => format!("'{w}'"),
            Tok::QuotedSheet(s) => format!("sheet '{s}'"),
            Tok::Op(o) => format!("operator '{o}'"),
            Tok::LParen => "'('".to_string(),
            Tok::RParen => "')'".to_string(),
            Tok::Sep => "separator".to_string(),
            Tok::Colon => "':'".to_string(),
            Tok::Bang => "'!'".to_string(),
        };
        ParseError::syntax(format!("expected {what}, found {found}"), self.pos())
    }

    fn comparison(&mut self) -> Result<FormulaAst, ParseError> {
        let mut left = self.concat()?;
        while let Some(op) = self.eat_op(&["=", "<>", "<", "<=", ">", ">="]) {
            let op = match op {
                "=" => BinaryOp::Eq,
                "<>" => BinaryOp::Ne,
                "<" => BinaryOp::Lt,
                "<=" => BinaryOp::Le,
                ">" => BinaryOp::Gt,
                _ => BinaryOp::Ge,
            };
            let right = self.concat()?;
            left = FormulaAst::binary(op, left, right);
        }
        Ok(left)
    }

    fn concat(&mut self) -> Result<FormulaAst, ParseError> {
        let mut left = self.additive()?;
        while self.eat_op(&["&"]).is_some() {
            let right = self.additive()?;
            left = FormulaAst::binary(BinaryOp::Concat, left, right);
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<FormulaAst, ParseError> {
        let mut left = self.term()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let op = if op == "+" { BinaryOp::Add } else { BinaryOp::Sub };
            let right = self.term()?;
            left = FormulaAst::binary(op, left, right);
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<FormulaAst, ParseError> {
        let mut left = self.unary()?;
        while let Some(op) = self.eat_op(&["*", "/"]) {
            let op = if op == "*" { BinaryOp::Mul } else { BinaryOp::Div };
            let right = self.unary()?;
            left = FormulaAst::binary(op, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<FormulaAst, ParseError> {
        if let Some(op) = self.eat_op(&["-", "+"]) {
            let op = if op == "-" { UnaryOp::Neg } else { UnaryOp::Pos };
            let operand = self.unary()?;
            return Ok(FormulaAst::unary(op, operand));
        }
        self.power()
    }

    fn power(&mut self) -> Result<FormulaAst, ParseError> {
        let base = self.primary()?;
        if self.eat_op(&["^"]).is_some() {
            let exponent = self.unary()?;
            return Ok(FormulaAst::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<FormulaAst, ParseError> {
        let before = self.at;
        let token = self.bump();
        match token.tok {
            Tok::Number(n) => Ok(FormulaAst::Number(n)),
            Tok::Str(s) => Ok(FormulaAst::Text(s)),
            Tok::LParen => {
                let inner = self.comparison()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::QuotedSheet(sheet) => {
                self.expect(Tok::Bang, "'!'")?;
                self.reference(Some(sheet))
            }
            Tok::Word(word) => {
                if *self.peek() == Tok::LParen {
                    return self.call(&word, token.pos);
                }
                if *self.peek() == Tok::Bang {
                    self.bump();
                    return self.reference(Some(word));
                }
                if word.eq_ignore_ascii_case("TRUE") {
                    return Ok(FormulaAst::Bool(true));
                }
                if word.eq_ignore_ascii_case("FALSE") {
                    return Ok(FormulaAst::Bool(false));
                }
                self.at = before;
                self.reference(None)
            }
            _ => {
                self.at = before;
                Err(self.unexpected("a value, reference or '('"))
            }
        }
    }

    fn single_ref(&mut self, sheet: Option<String>) -> Result<CellRef, ParseError> {
        let pos = self.pos();
        let before = self.at;
        match self.bump().tok {
            Tok::Word(word) => {
                let mut r = parse_local_ref(&word)
                    .ok_or_else(|| ParseError::syntax(format!("bad reference '{word}'"), pos))?;
                r.sheet = sheet;
                Ok(r)
            }
            _ => {
                self.at = before;
                Err(self.unexpected("a cell reference"))
            }
        }
    }

    fn reference(&mut self, sheet: Option<String>) -> Result<FormulaAst, ParseError> {
        let start = self.single_ref(sheet.clone())?;
        if *self.peek() != Tok::Colon {
            return Ok(FormulaAst::Ref(start));
        }
        self.bump();
        // allow a repeated sheet prefix on the range end if it names the same sheet
        let end_sheet_pos = self.pos();
        let mut end_sheet = None;
        match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Word(w), Tok::Bang) => {
                end_sheet = Some(w);
                self.bump();
                self.bump();
            }
            (Tok::QuotedSheet(s), Tok::Bang) => {
                end_sheet = Some(s);
                self.bump();
                self.bump();
            }
            _ => {}
        }
        if end_sheet.is_some() && end_sheet != sheet {
            return Err(ParseError::syntax("range ends on different sheets", end_sheet_pos));
        }
        let end = self.single_ref(sheet)?;
        Ok(normalize_range(start, end))
    }

    fn call(&mut self, name: &str, pos: usize) -> Result<FormulaAst, ParseError> {
        let func = Function::from_name(name).ok_or_else(|| ParseError {
            kind: ParseErrorKind::UnknownFunction,
            message: format!("unknown function '{}'", name.to_ascii_uppercase()),
            position: pos,
        })?;
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            self.bump();
            return Ok(FormulaAst::Call(func, args));
        }
        loop {
            args.push(self.comparison()?);
            match self.peek() {
                Tok::Sep => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    break;
                }
                _ => return Err(self.unexpected("',' or ')'")),
            }
        }
        Ok(FormulaAst::Call(func, args))
    }
}

fn normalize_range(a: CellRef, b: CellRef) -> FormulaAst {
    let (c1, c1_abs, c2, c2_abs) = if a.column <= b.column {
        (a.column, a.col_absolute, b.column, b.col_absolute)
    } else {
        (b.column, b.col_absolute, a.column, a.col_absolute)
    };
    let (r1, r1_abs, r2, r2_abs) = if a.row <= b.row {
        (a.row, a.row_absolute, b.row, b.row_absolute)
    } else {
        (b.row, b.row_absolute, a.row, a.row_absolute)
    };
    FormulaAst::Range(
        CellRef {
            sheet: a.sheet.clone(),
            column: c1,
            row: r1,
            col_absolute: c1_abs,
            row_absolute: r1_abs,
        },
        CellRef {
            sheet: a.sheet,
            column: c2,
            row: r2,
            col_absolute: c2_abs,
            row_absolute: r2_abs,
        },
    )
}

/// Parses formula source text, which must start with `=`.
pub fn parse_formula(text: &str) -> Result<FormulaAst, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    if chars.first() != Some(&'=') {
        return Err(ParseError::syntax("formula must start with '='", 0));
    }
    let tokens = lex(&chars[1..], 1)?;
    let mut parser = Parser { tokens, at: 0 };
    if *parser.peek() == Tok::End {
        return Err(ParseError::syntax("empty formula", 1));
    }
    let ast = parser.comparison()?;
    if *parser.peek() != Tok::End {
        return Err(match parser.peek() {
            Tok::RParen => ParseError::syntax("unbalanced ')'", parser.pos()),
            _ => parser.unexpected("an operator or end of formula"),
        });
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> FormulaAst {
        FormulaAst::Ref(parse_local_ref(s).unwrap())
    }

    fn n(v: f64) -> FormulaAst {
        FormulaAst::Number(v)
    }

    fn bin(op: BinaryOp, l: FormulaAst, rr: FormulaAst) -> FormulaAst {
        FormulaAst::binary(op, l, rr)
    }

    #[test]
    fn sample_formulas() {
        assert_eq!(
            parse_formula("=(B3-C3)/2").unwrap(),
            bin(BinaryOp::Div, bin(BinaryOp::Sub, r("B3"), r("C3")), n(2.0))
        );
        let range = FormulaAst::Range(parse_local_ref("B3").unwrap(), parse_local_ref("B5").unwrap());
        assert_eq!(parse_formula("=AVG(B3:B5)").unwrap(), FormulaAst::Call(Function::Avg, vec![range.clone()]));
        assert_eq!(parse_formula("=average(b3:B5)").unwrap(), FormulaAst::Call(Function::Avg, vec![range]));
    }

    #[test]
    fn precedence_and_associativity() {
        // Pow binds tighter than unary minus
        assert_eq!(
            parse_formula("=-2^2").unwrap(),
            FormulaAst::unary(UnaryOp::Neg, bin(BinaryOp::Pow, n(2.0), n(2.0)))
        );
        assert_eq!(
            parse_formula("=2^3^2").unwrap(),
            bin(BinaryOp::Pow, n(2.0), bin(BinaryOp::Pow, n(3.0), n(2.0)))
        );
        assert_eq!(
            parse_formula("=1-2-3").unwrap(),
            bin(BinaryOp::Sub, bin(BinaryOp::Sub, n(1.0), n(2.0)), n(3.0))
        );
        assert_eq!(
            parse_formula("=1+2*3").unwrap(),
            bin(BinaryOp::Add, n(1.0), bin(BinaryOp::Mul, n(2.0), n(3.0)))
        );
        assert_eq!(
            parse_formula("=1+2&3=4").unwrap(),
            bin(
                BinaryOp::Eq,
                bin(BinaryOp::Concat, bin(BinaryOp::Add, n(1.0), n(2.0)), n(3.0)),
                n(4.0)
            )
        );
        assert_eq!(
            parse_formula("=-A1*B1").unwrap(),
            bin(BinaryOp::Mul, FormulaAst::unary(UnaryOp::Neg, r("A1")), r("B1"))
        );
    }

    #[test]
    fn separators_and_references() {
        let semi = parse_formula("=ROUND(SUM(A1:A4);2)").unwrap();
        let comma = parse_formula("=ROUND(SUM(A1:A4),2)").unwrap();
        assert_eq!(semi, comma);
        let abs = parse_formula("=$A$1+A$2+$B3").unwrap();
        assert_eq!(abs.to_string(), "$A$1+A$2+$B3");
        let sheet = parse_formula("=Data!A1+'My Sheet'!B2:C3").unwrap();
        assert_eq!(sheet.to_string(), "Data!A1+'My Sheet'!B2:C3");
        // reversed corners normalize to top-left first
        assert_eq!(parse_formula("=SUM(C5:B3)").unwrap().to_string(), "SUM(B3:C5)");
        assert_eq!(parse_formula("=IF(A1>=1,\"a\"\"b\",FALSE)").unwrap().to_string(), "IF(A1>=1,\"a\"\"b\",FALSE)");
    }

    #[test]
    fn errors() {
        let e = parse_formula("=1+").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!(e.position, 3);
        let e = parse_formula("=SUMM(A1)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownFunction);
        assert_eq!(e.position, 1);
        for bad in ["=(1+2", "=1+2)", "=", "1+2", "=3D", "=A0", "=SUM(A1,)", "=\"abc", "=1 2", "=A1:", "=#", "=ZZZZ1"] {
            assert!(parse_formula(bad).is_err(), "{bad}");
        }
    }
}
