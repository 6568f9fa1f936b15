//! Workbook text format.
//!
//! A UTF-8 JSON document:
//!
//! ```text
//! {"name": "grades", "sheets": [{"name": "Sheet1", "cells": {"B3": 92, "D3": "=(B3+C3)/2"}}]}
//! ```
//!
//! Cell encodings: JSON number → number constant, `true`/`false` → boolean,
//! a string starting with `=` → formula, a string starting with `'` → text
//! with the apostrophe stripped, any other string → text.

use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CellAddress, CellContent, Sheet, Value, Workbook};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("workbook format error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate sheet name '{0}'")]
    DuplicateSheet(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkbook {
    name: String,
    sheets: Vec<RawSheet>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSheet {
    name: String,
    #[serde(default)]
    cells: RawCells,
}

#[derive(Default)]
struct RawCells(Vec<(String, RawCell)>);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCell {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl<'de> Deserialize<'de> for RawCells {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CellsVisitor;

        impl<'de> Visitor<'de> for CellsVisitor {
            type Value = RawCells;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from A1 addresses to cell contents")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawCells, A::Error> {
                let mut out: Vec<(String, RawCell)> = Vec::new();
                let mut seen = std::collections::HashSet::new();
                while let Some(key) = map.next_key::<String>()? {
                    let normalized = key.to_ascii_uppercase();
                    super::address::parse_a1(&normalized)
                        .map_err(|e| de::Error::custom(format!("bad cell address '{key}': {e}")))?;
                    if !seen.insert(normalized.clone()) {
                        return Err(de::Error::custom(format!("duplicate cell address '{key}'")));
                    }
                    let cell: RawCell = map.next_value().map_err(|_| {
                        de::Error::custom(format!(
                            "cell '{key}' must be a number, a boolean or a string"
                        ))
                    })?;
                    out.push((normalized, cell));
                }
                Ok(RawCells(out))
            }
        }

        deserializer.deserialize_map(CellsVisitor)
    }
}

fn decode_cell(raw: RawCell) -> CellContent {
    match raw {
        RawCell::Bool(b) => CellContent::Constant(Value::Boolean(b)),
        RawCell::Number(n) => CellContent::Constant(Value::number(n)),
        RawCell::Text(s) => {
            if s.starts_with('=') {
                CellContent::Formula(s)
            } else if let Some(rest) = s.strip_prefix('\'') {
                CellContent::Constant(Value::Text(rest.to_string()))
            } else {
                CellContent::Constant(Value::Text(s))
            }
        }
    }
}

/// Parses the workbook text format. Formulas are kept as source text.
pub fn read_workbook(text: &str) -> Result<Workbook, FormatError> {
    let raw: RawWorkbook = serde_json::from_str(text)?;
    let mut wb = Workbook::new(raw.name);
    for sheet in raw.sheets {
        if !wb.add_sheet(&sheet.name) {
            return Err(FormatError::DuplicateSheet(sheet.name));
        }
        for (key, cell) in sheet.cells.0 {
            let addr = CellAddress::parse(&key, &sheet.name).expect("validated while decoding");
            wb.set(addr, decode_cell(cell));
        }
    }
    Ok(wb)
}

struct CellsOut<'a>(&'a Sheet);

impl Serialize for CellsOut<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (addr, content) in self.0.cells() {
            let key = addr.a1();
            match content {
                CellContent::Formula(src) => map.serialize_entry(&key, src)?,
                CellContent::Constant(Value::Number(n)) => map.serialize_entry(&key, n)?,
                CellContent::Constant(Value::Boolean(b)) => map.serialize_entry(&key, b)?,
                CellContent::Constant(Value::Text(s)) => {
                    if s.starts_with('=') || s.starts_with('\'') {
                        map.serialize_entry(&key, &format!("'{s}"))?
                    } else {
                        map.serialize_entry(&key, s)?
                    }
                }
                // error constants only arise in corrected working copies; they are
                // written as their display code and read back as text
                CellContent::Constant(Value::Error(kind)) => map.serialize_entry(&key, kind.code())?,
                CellContent::Constant(Value::Blank) => {}
            }
        }
        map.end()
    }
}

#[derive(Serialize)]
struct SheetOut<'a> {
    name: &'a str,
    cells: CellsOut<'a>,
}

#[derive(Serialize)]
struct WorkbookOut<'a> {
    name: &'a str,
    sheets: Vec<SheetOut<'a>>,
}

/// Serializes a workbook; cells are emitted row-major per sheet.
pub fn write_workbook(wb: &Workbook) -> String {
    let out = WorkbookOut {
        name: &wb.name,
        sheets: wb
            .sheets()
            .iter()
            .map(|s| SheetOut {
                name: &s.name,
                cells: CellsOut(s),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&out).expect("workbook serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = r#"{"name": "t", "sheets": [{"name": "S", "cells": {
        "B3": 92, "D3": "=(B3-C3)/2", "A1": "'=x", "A2": "Name", "A4": true}}]}"#;

    fn at(s: &str) -> CellAddress {
        CellAddress::parse(s, "S").unwrap()
    }

    #[test]
    fn reads_cells() {
        let wb = read_workbook(SAMPLE).unwrap();
        assert_eq!(wb.get(&at("B3")), Some(&CellContent::Constant(Value::Number(92.0))));
        assert_eq!(wb.get(&at("D3")), Some(&CellContent::Formula("=(B3-C3)/2".into())));
        assert_eq!(wb.get(&at("A1")), Some(&CellContent::Constant(Value::text("=x"))));
        assert_eq!(wb.get(&at("A2")), Some(&CellContent::Constant(Value::text("Name"))));
        assert_eq!(wb.get(&at("A4")), Some(&CellContent::Constant(Value::Boolean(true))));
        assert_eq!(wb.constant(&at("Q17")), Some(Value::Blank));
    }

    #[test]
    fn writes_escape_and_row_major() {
        let wb = read_workbook(SAMPLE).unwrap();
        let text = write_workbook(&wb);
        assert!(text.contains(r#""A1": "'=x""#));
        let a1 = text.find("\"A1\"").unwrap();
        let a2 = text.find("\"A2\"").unwrap();
        let b3 = text.find("\"B3\"").unwrap();
        let d3 = text.find("\"D3\"").unwrap();
        let a4 = text.find("\"A4\"").unwrap();
        assert!(a1 < a2 && a2 < b3 && b3 < d3 && d3 < a4);
        assert_eq!(read_workbook(&text).unwrap(), wb);
    }

    #[test]
    fn empty_workbook() {
        let wb = read_workbook(r#"{"name": "e", "sheets": [{"name": "S", "cells": {}}]}"#).unwrap();
        assert_eq!(wb.cell_count(), 0);
        let text = write_workbook(&wb);
        assert!(text.contains("\"cells\": {}"));
        assert_eq!(read_workbook(&text).unwrap(), wb);
    }

    #[test]
    fn structural_errors() {
        let cases = [
            r#"{"name": "t", "sheets": [], "extra": 1}"#,
            r#"{"name": "t", "sheets": [{"name": "S", "cells": {"A1": 1, "A1": 2}}]}"#,
            r#"{"name": "t", "sheets": [{"name": "S", "cells": {"A1": 1, "a1": 2}}]}"#,
            r#"{"name": "t", "sheets": [{"name": "S", "cells": {"3D": 1}}]}"#,
            r#"{"name": "t", "sheets": [{"name": "S", "cells": {"A1": null}}]}"#,
            r#"{"name": "t", "sheets": [{"name": "S"}, {"name": "S"}]}"#,
            r#"{"name": "t", "sheets": [{"name": "S", "bogus": 1}]}"#,
        ];
        for case in cases {
            assert!(read_workbook(case).is_err(), "{case}");
        }
    }

    #[test]
    fn errors_carry_position() {
        let err = read_workbook("{\"name\": \"t\",\n \"sheets\": [{\"name\": \"S\", \"cells\": {\"A0\": 1}}]}")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("A0") && msg.contains("line 2"), "{msg}");
    }

    fn arb_content() -> impl Strategy<Value = CellContent> {
        prop_oneof![
            (-1e6f64..1e6).prop_map(|n| CellContent::Constant(Value::number(n))),
            any::<bool>().prop_map(|b| CellContent::Constant(Value::Boolean(b))),
            "[ -~]{0,8}".prop_map(|s| CellContent::Constant(Value::Text(s))),
            "[A-D][1-9][+*-][0-9]".prop_map(|s| CellContent::Formula(format!("={s}"))),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(cells in proptest::collection::vec(((1u32..30), (1u32..40), arb_content()), 0..25)) {
            let mut wb = Workbook::new("rt");
            wb.add_sheet("Main");
            wb.add_sheet("Other sheet");
            for (i, (col, row, content)) in cells.into_iter().enumerate() {
                let sheet = if i % 3 == 0 { "Other sheet" } else { "Main" };
                wb.set(CellAddress::new(sheet, col, row), content);
            }
            let back = read_workbook(&write_workbook(&wb)).unwrap();
            prop_assert_eq!(back, wb);
        }
    }
}
