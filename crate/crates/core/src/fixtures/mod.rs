//! Bundled example task (a grade sheet with a wrong operator and a wrong
//! reference, graded against its correct version) and the randomized
//! workbook corpus used by the property suites.

pub mod corpus;

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::eval::{evaluate, values_equal, Tolerance};
use crate::feedback::{BundleError, TaskBundle};
use crate::model::{read_workbook, CellAddress, FormatError, Value, Workbook};

const TASK: &str = include_str!("../../data/v1/grades/task.json");
const SUBMISSION: &str = include_str!("../../data/v1/grades/submission.wb");
const SOLUTION: &str = include_str!("../../data/v1/grades/solution.wb");
const EXPECTED: &str = include_str!("../../data/v1/grades/expected.json");

/// Names accepted by [`load_fixture`].
pub const FIXTURE_NAMES: [&str; 2] = ["grades", "grades-solution-only"];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown fixture '{0}'")]
    Unknown(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Workbook(#[from] FormatError),
    #[error("expected messages: {0}")]
    Expected(#[from] serde_json::Error),
    #[error("fixture self-check failed: {0}")]
    SelfCheck(String),
}

/// Messages expected per feedback level.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedMessages {
    /// Levels whose messages were produced with quality feedback forced on.
    pub forced_quality: Vec<u8>,
    pub levels: BTreeMap<u8, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub name: String,
    pub submission: Workbook,
    pub solution: Workbook,
    pub bundle: TaskBundle,
    pub expected: ExpectedMessages,
}

fn self_check(wb: &Workbook, expected: &[(&str, f64)]) -> Result<(), FixtureError> {
    let grid = evaluate(wb);
    let home = wb.primary_sheet();
    for (cell, value) in expected {
        let addr = CellAddress::parse(cell, home).expect("fixture address");
        let got = grid.get(&addr);
        if !values_equal(&got, &Value::Number(*value), &Tolerance::default()) {
            return Err(FixtureError::SelfCheck(format!(
                "{} {cell} evaluates to {got}, expected {value}",
                wb.name
            )));
        }
    }
    Ok(())
}

/// Loads and validates a bundled fixture.
pub fn load_fixture(name: &str) -> Result<FixtureSet, FixtureError> {
    if !FIXTURE_NAMES.contains(&name) {
        return Err(FixtureError::Unknown(name.to_string()));
    }
    let solution = read_workbook(SOLUTION)?;
    let bundle = TaskBundle::from_json(TASK, |_| Ok(SOLUTION.to_string()))?;
    self_check(
        &solution,
        &[("D3", 75.0), ("C6", (58.0 + 70.0 + 75.0) / 3.0), ("D6", (75.0 + 63.0 + 85.0) / 3.0), ("B6", 81.0)],
    )?;
    let (submission, expected) = if name == "grades" {
        let submission = read_workbook(SUBMISSION)?;
        self_check(&submission, &[("D3", 17.0), ("C6", 71.0), ("D6", 55.0), ("B6", 81.0)])?;
        (submission, serde_json::from_str(EXPECTED)?)
    } else {
        let correct = vec!["The spreadsheet is correct.".to_string()];
        let levels = (1..=7).map(|l| (l, correct.clone())).collect();
        (solution.clone(), ExpectedMessages { forced_quality: vec![7], levels })
    };
    Ok(FixtureSet {
        name: name.to_string(),
        submission,
        solution,
        bundle,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_and_unknown() {
        let f = load_fixture("grades").unwrap();
        assert_eq!(f.bundle.task, "grades");
        assert_eq!(f.bundle.reference, f.solution);
        assert_eq!(f.expected.levels.len(), 7);
        assert_ne!(f.submission, f.solution);
        let s = load_fixture("grades-solution-only").unwrap();
        assert_eq!(s.submission, s.solution);
        assert!(matches!(load_fixture("bogus"), Err(FixtureError::Unknown(_))));
    }

    #[test]
    fn self_check_rejects_wrong_values() {
        let wb = Workbook::single_sheet("S", &[("A1", "=1+1")]);
        assert!(self_check(&wb, &[("A1", 2.0)]).is_ok());
        assert!(matches!(self_check(&wb, &[("A1", 3.0)]), Err(FixtureError::SelfCheck(_))));
    }
}
