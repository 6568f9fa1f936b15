use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Largest column index accepted in an address (`XFD`).
pub const MAX_COLUMN: u32 = 16_384;
/// Largest row index accepted in an address.
pub const MAX_ROW: u32 = 1_048_576;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("empty cell address")]
    Empty,
    #[error("malformed cell address '{0}'")]
    Malformed(String),
    #[error("cell address '{0}' is out of bounds")]
    OutOfBounds(String),
}

/// A cell position: sheet name plus 1-based column and row.
///
/// Ordering is row-major within a sheet (row first, then column); sheets
/// compare by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellAddress {
    pub sheet: String,
    pub column: u32,
    pub row: u32,
}

impl CellAddress {
    pub fn new(sheet: impl Into<String>, column: u32, row: u32) -> Self {
        debug_assert!(column >= 1 && row >= 1);
        Self {
            sheet: sheet.into(),
            column,
            row,
        }
    }

    /// Parses `A1`-style text, optionally prefixed with `Sheet!`.
    /// Unqualified addresses land on `default_sheet`.
    pub fn parse(text: &str, default_sheet: &str) -> Result<Self, AddressError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(AddressError::Empty);
        }
        let (sheet, local) = match text.rfind('!') {
            Some(idx) => {
                let raw = &text[..idx];
                let sheet = raw
                    .strip_prefix('\'')
                    .and_then(|s| s.strip_suffix('\''))
                    .map(|s| s.replace("''", "'"))
                    .unwrap_or_else(|| raw.to_string());
                if sheet.is_empty() {
                    return Err(AddressError::Malformed(text.to_string()));
                }
                (sheet, &text[idx + 1..])
            }
            None => (default_sheet.to_string(), text),
        };
        let (column, row) = parse_a1(local)?;
        Ok(Self { sheet, column, row })
    }

    /// Local `A1` form without the sheet.
    pub fn a1(&self) -> String {
        format!("{}{}", column_name(self.column), self.row)
    }

    /// Renders without the sheet prefix when the address lives on `home`.
    pub fn display_from(&self, home: &str) -> String {
        if self.sheet == home {
            self.a1()
        } else {
            format!("{}!{}", quote_sheet(&self.sheet), self.a1())
        }
    }
}

impl Ord for CellAddress {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sheet
            .cmp(&other.sheet)
            .then(self.row.cmp(&other.row))
            .then(self.column.cmp(&other.column))
    }
}

impl PartialOrd for CellAddress {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", quote_sheet(&self.sheet), self.a1())
    }
}

pub(crate) fn quote_sheet(name: &str) -> String {
    if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        name.to_string()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}

/// Parses `LETTERS DIGITS` (case-insensitive, no `$`) into (column, row).
pub fn parse_a1(text: &str) -> Result<(u32, u32), AddressError> {
    if text.is_empty() {
        return Err(AddressError::Empty);
    }
    let split = text
        .find(|c: char| !c.is_ascii_alphabetic())
        .ok_or_else(|| AddressError::Malformed(text.to_string()))?;
    let (letters, digits) = text.split_at(split);
    if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(AddressError::Malformed(text.to_string()));
    }
    let column = column_index(letters).ok_or_else(|| AddressError::OutOfBounds(text.to_string()))?;
    let row: u32 = digits
        .parse()
        .map_err(|_| AddressError::OutOfBounds(text.to_string()))?;
    if row == 0 {
        return Err(AddressError::Malformed(text.to_string()));
    }
    if row > MAX_ROW {
        return Err(AddressError::OutOfBounds(text.to_string()));
    }
    Ok((column, row))
}

/// `A` → 1, `Z` → 26, `AA` → 27. `None` when out of range.
pub fn column_index(letters: &str) -> Option<u32> {
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    let mut n: u32 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        n = n * 26 + u32::from(b.to_ascii_uppercase() - b'A' + 1);
    }
    (n <= MAX_COLUMN).then_some(n)
}

pub fn column_name(mut column: u32) -> String {
    let mut out = Vec::new();
    while column > 0 {
        let rem = (column - 1) % 26;
        out.push(b'A' + rem as u8);
        column = (column - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}
