//! Feedback engine for spreadsheet assignments graded against a single
//! reference workbook.

pub mod diff;
pub mod eval;
pub mod feedback;
pub mod fixtures;
pub mod formula;
pub mod graph;
pub mod matching;
pub mod model;
pub mod quality;
