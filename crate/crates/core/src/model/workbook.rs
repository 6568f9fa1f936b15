use std::collections::BTreeMap;

use super::{CellAddress, Value};

/// What a cell holds before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum CellContent {
    Constant(Value),
    /// Formula source including the leading `=`.
    Formula(String),
}

impl CellContent {
    pub fn is_formula(&self) -> bool {
        matches!(self, CellContent::Formula(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    pub name: String,
    cells: BTreeMap<CellAddress, CellContent>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cells: BTreeMap::new(),
        }
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (&CellAddress, &CellContent)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// An ordered collection of uniquely named sheets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Workbook {
    pub name: String,
    sheets: Vec<Sheet>,
}

impl Workbook {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            sheets: Vec::new(),
        }
    }

    /// Convenience constructor for a one-sheet workbook from `(A1, content)` pairs.
    /// Contents starting with `=` are formulas; anything else is parsed like
    /// a file cell (numbers, TRUE/FALSE, text).
    pub fn single_sheet(sheet: &str, cells: &[(&str, &str)]) -> Self {
        let mut wb = Workbook::new("workbook");
        wb.add_sheet(sheet);
        for (addr, raw) in cells {
            let addr = CellAddress::parse(addr, sheet).expect("valid address");
            let content = if raw.starts_with('=') {
                CellContent::Formula(raw.to_string())
            } else if let Ok(n) = raw.parse::<f64>() {
                CellContent::Constant(Value::number(n))
            } else if raw.eq_ignore_ascii_case("true") || raw.eq_ignore_ascii_case("false") {
                CellContent::Constant(Value::Boolean(raw.eq_ignore_ascii_case("true")))
            } else {
                CellContent::Constant(Value::text(raw.strip_prefix('\'').unwrap_or(raw)))
            };
            wb.set(addr, content);
        }
        wb
    }

    /// Adds an empty sheet; returns false if the name is taken.
    pub fn add_sheet(&mut self, name: &str) -> bool {
        if self.sheet(name).is_some() {
            return false;
        }
        self.sheets.push(Sheet::new(name));
        true
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets.iter().find(|s| s.name == name)
    }

    pub fn has_sheet(&self, name: &str) -> bool {
        self.sheet(name).is_some()
    }

    /// Name of the first sheet; unqualified addresses in bundles and
    /// messages are relative to it.
    pub fn primary_sheet(&self) -> &str {
        self.sheets.first().map(|s| s.name.as_str()).unwrap_or("Sheet1")
    }

    pub fn get(&self, addr: &CellAddress) -> Option<&CellContent> {
        self.sheet(&addr.sheet)?.cells.get(addr)
    }

    /// Value of a constant cell, `Blank` when absent. Formula cells return `None`.
    pub fn constant(&self, addr: &CellAddress) -> Option<Value> {
        match self.get(addr) {
            None => Some(Value::Blank),
            Some(CellContent::Constant(v)) => Some(v.clone()),
            Some(CellContent::Formula(_)) => None,
        }
    }

    /// Inserts or replaces a cell, creating the sheet if needed.
    /// A `Blank` constant removes the cell.
    pub fn set(&mut self, addr: CellAddress, content: CellContent) {
        if !self.has_sheet(&addr.sheet) {
            self.sheets.push(Sheet::new(addr.sheet.clone()));
        }
        let sheet = self
            .sheets
            .iter_mut()
            .find(|s| s.name == addr.sheet)
            .expect("sheet exists");
        if content == CellContent::Constant(Value::Blank) {
            sheet.cells.remove(&addr);
        } else {
            sheet.cells.insert(addr, content);
        }
    }

    /// All cells, sheet by sheet in workbook order, row-major inside a sheet.
    pub fn cells(&self) -> impl Iterator<Item = (&CellAddress, &CellContent)> {
        self.sheets.iter().flat_map(|s| s.cells.iter())
    }

    pub fn formulas(&self) -> impl Iterator<Item = (&CellAddress, &str)> {
        self.cells().filter_map(|(a, c)| match c {
            CellContent::Formula(src) => Some((a, src.as_str())),
            CellContent::Constant(_) => None,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.sheets.iter().map(Sheet::len).sum()
    }
}
