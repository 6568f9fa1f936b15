//! Workbook, cell and value types plus the workbook text format.

mod address;
mod io;
mod value;
mod workbook;

pub use address::{column_index, column_name, parse_a1, AddressError, CellAddress, MAX_COLUMN, MAX_ROW};
pub(crate) use address::quote_sheet;
pub use io::{read_workbook, write_workbook, FormatError};
pub use value::{ErrorKind, Value};
pub use workbook::{CellContent, Sheet, Workbook};
