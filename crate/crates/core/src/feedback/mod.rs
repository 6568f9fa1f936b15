//! Feedback generation at seven levels, from pass/fail up to quality hints.
//!
//! | level | content |
//! |-------|---------|
//! | 1 | whether the spreadsheet is correct |
//! | 2 | cells with wrong values |
//! | 3 | cells with wrong formulas |
//! | 4 | level 3 plus lecturer annotations and learning material |
//! | 5 | the kind of mistake per formula error |
//! | 6 | concrete repair hints |
//! | 7 | quality suggestions (only on a correct submission unless forced) |

mod bundle;
mod report;

pub use bundle::{normalize_tokens, Annotation, BundleError, MaterialEntry, TaskBundle};
pub use report::{
    parse_report, render_json, render_text, Detail, Diagnosis, DiagnosisKind, FeedbackReport, Finding, MetricsPair,
    Status, SyntaxEntry,
};

use thiserror::Error;

use crate::diff::{diff_formula, Category, ErrorDetail, Hint, ItemKind};
use crate::eval::Program;
use crate::formula::syntax_check;
use crate::graph::DependencyGraph;
use crate::matching::match_values;
use crate::model::{CellAddress, CellContent, Value, Workbook};
use crate::quality::{
    cell_list, compare_metrics, compute_metrics, duplicate_calculations, idiom_suggestions, QualityFinding,
    QualityMetrics,
};

pub const MIN_LEVEL: u8 = 1;
pub const MAX_LEVEL: u8 = 7;

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("feedback level must be between 1 and 7, got {0}")]
    Level(u8),
    #[error("invalid task bundle: {0}")]
    Bundle(#[from] BundleError),
}

/// Nearest text constant strictly above (column header) and strictly to the
/// left (row header) of `cell` in the reference.
pub fn header_context(reference: &Workbook, cell: &CellAddress) -> (Option<String>, Option<String>) {
    let text_at = |column: u32, row: u32| match reference.get(&CellAddress::new(cell.sheet.clone(), column, row)) {
        Some(CellContent::Constant(Value::Text(s))) => Some(s.clone()),
        _ => None,
    };
    let column = (1..cell.row).rev().find_map(|r| text_at(cell.column, r));
    let row = (1..cell.column).rev().find_map(|c| text_at(c, cell.row));
    (column, row)
}

pub fn material_message(title: &str) -> String {
    format!("You should recall the info in the '{title}' tutorial.")
}

/// Annotation and material messages for the given cells, in cell order,
/// without repeats. `headers[i]` holds the header texts of `cells[i]`.
pub fn lookup_annotations(bundle: &TaskBundle, cells: &[CellAddress], headers: &[Vec<String>]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |m: String| {
        if !out.contains(&m) {
            out.push(m);
        }
    };
    for (i, cell) in cells.iter().enumerate() {
        for a in bundle.annotations.iter().filter(|a| a.contains(cell)) {
            push(a.message());
        }
        let tokens: Vec<String> = headers
            .get(i)
            .into_iter()
            .flatten()
            .flat_map(|h| normalize_tokens(h))
            .collect();
        for m in &bundle.materials {
            if m.keywords.iter().any(|k| tokens.contains(k)) {
                push(material_message(&m.title));
            }
        }
    }
    out
}

fn verb_list(cells: &[CellAddress], home: &str, singular: &str, plural: &str) -> String {
    if cells.len() == 1 {
        format!("The {singular} of cell {} is incorrect.", cell_list(cells, home))
    } else {
        format!("The {plural} of cells {} are incorrect.", cell_list(cells, home))
    }
}

fn category_message(detail: &ErrorDetail, cell: &str) -> String {
    match detail.category {
        Category::Operator => format!("An operator of cell {cell} is incorrect."),
        Category::Function => format!("A function of cell {cell} is incorrect."),
        Category::Reference => format!("A reference of cell {cell} is incorrect."),
        Category::Constant => format!("A constant of cell {cell} is incorrect."),
        Category::Unclassified => format!("The formula of cell {cell} is incorrect."),
    }
}

fn hint_messages(detail: &ErrorDetail, cell: &str) -> Vec<String> {
    let mut out = Vec::new();
    let refs: Vec<&str> = detail
        .hints
        .iter()
        .filter_map(|h| match h {
            Hint::Use { kind: ItemKind::Reference, fragment } => Some(fragment.as_str()),
            _ => None,
        })
        .collect();
    let mut refs_done = false;
    for hint in &detail.hints {
        match hint {
            Hint::Use { kind: ItemKind::Reference, .. } => {
                if !refs_done {
                    refs_done = true;
                    let list = refs.join(", ");
                    out.push(if refs.len() == 1 && !list.contains(':') {
                        format!("The reference {list} should be used in cell {cell}.")
                    } else {
                        format!("The references {list} should be used in cell {cell}.")
                    });
                }
            }
            Hint::Use { kind: ItemKind::Constant, fragment } => {
                out.push(format!("The constant {fragment} should be used in cell {cell}."))
            }
            Hint::Use { kind, fragment } => out.push(format!("The {kind} '{fragment}' should be used in cell {cell}.")),
            Hint::Anchoring { expected, found } => {
                let style = match (expected.contains('$'), found.contains('$')) {
                    (true, false) => "absolute ",
                    (false, true) => "relative ",
                    _ => "",
                };
                out.push(format!("Use the {style}reference {expected} instead of {found} in cell {cell}."));
            }
            Hint::FormulaExpected { top } => {
                out.push(format!("Cell {cell} should contain a formula using '{top}'."))
            }
            Hint::Unclassified => out.push(format!("The formula of cell {cell} does not produce the expected result.")),
        }
    }
    out.extend(detail.extras.iter().map(|e| e.message.clone()));
    if let Some(s) = &detail.spelling {
        out.push(format!(
            "Check the spelling of '{}' in cell {cell}; did you mean '{}'?",
            s.found, s.expected
        ));
    }
    out
}

fn to_finding(f: &QualityFinding, home: &str) -> Finding {
    let message = f.message(home);
    let cells = |cells: &[CellAddress]| cells.iter().map(|c| c.display_from(home)).collect();
    match f {
        QualityFinding::MetricExceeded { metric, submission, reference } => Finding::MetricExceeded {
            metric: metric.clone(),
            submission: *submission,
            reference: *reference,
            message,
        },
        QualityFinding::IdiomSuggestion { function, cells: c } => Finding::IdiomSuggestion {
            function: function.name().to_string(),
            cells: cells(c),
            message,
        },
        QualityFinding::DuplicateCalculation { cells: c } => Finding::DuplicateCalculation { cells: cells(c), message },
    }
}

fn metrics_of(wb: &Workbook) -> QualityMetrics {
    let program = Program::compile(wb);
    let grid = program.evaluate();
    compute_metrics(wb, &DependencyGraph::from_program(&program, &grid), &grid)
}

/// Grades `submission` against the bundle and renders the messages of one
/// feedback level. The machine-readable parts of the report (diagnoses,
/// quality findings, metrics) are complete at every level.
pub fn generate_feedback(
    bundle: &TaskBundle,
    submission: &Workbook,
    level: u8,
    force_quality: bool,
) -> Result<FeedbackReport, FeedbackError> {
    if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
        return Err(FeedbackError::Level(level));
    }
    bundle.validate()?;
    let home = bundle.reference.primary_sheet();
    let mut report = FeedbackReport {
        task: bundle.task.clone(),
        level,
        status: Status::Pass,
        messages: Vec::new(),
        diagnoses: Vec::new(),
        quality: Vec::new(),
        metrics: None,
        syntax: Vec::new(),
    };

    let syntax = syntax_check(submission);
    if !syntax.is_clean() {
        report.status = Status::SyntaxError;
        for issue in syntax.errors {
            let cell = issue.cell.display_from(home);
            report.messages.push(format!(
                "The formula of cell {cell} cannot be read: {} (position {}).",
                issue.message, issue.position
            ));
            report.syntax.push(SyntaxEntry {
                cell,
                message: issue.message,
                position: issue.position,
            });
        }
        return Ok(report);
    }

    let result = match_values(&bundle.reference, submission, &bundle.tolerance, bundle.graded_cells.as_deref());
    let mut details = Vec::new();
    for cell in &result.value_errors {
        let detail = result.is_formula_error(cell).then(|| {
            diff_formula(cell, bundle.reference.get(cell), submission.get(cell), &bundle.tolerance)
        });
        report.diagnoses.push(Diagnosis {
            cell: cell.display_from(home),
            kind: if detail.is_some() { DiagnosisKind::FormulaError } else { DiagnosisKind::ValueError },
            detail: detail.as_ref().map(|d| Detail {
                category: d.category,
                expected: d.expected.clone(),
                found: d.found.clone(),
                extras: d.extras.clone(),
                spelling: d.spelling.clone(),
            }),
        });
        details.extend(detail);
    }

    let sub_metrics = metrics_of(submission);
    let ref_metrics = metrics_of(&bundle.reference);
    let mut findings = idiom_suggestions(submission, &bundle.quality);
    findings.extend(duplicate_calculations(submission));
    findings.extend(compare_metrics(&sub_metrics, &ref_metrics, &bundle.quality));
    report.quality = findings.iter().map(|f| to_finding(f, home)).collect();
    report.metrics = Some(MetricsPair {
        submission: sub_metrics,
        reference: ref_metrics,
    });
    let quality_messages: Vec<String> = findings.iter().map(|f| f.message(home)).collect();

    if result.is_correct() {
        report.messages.push("The spreadsheet is correct.".to_string());
        if level == MAX_LEVEL {
            report.messages.extend(quality_messages);
        }
        return Ok(report);
    }
    report.status = Status::Fail;

    let formula_errors = &result.formula_errors;
    let level3 = || verb_list(formula_errors, home, "formula", "formulas");
    report.messages = match level {
        1 => vec!["The spreadsheet is incorrect.".to_string()],
        2 => vec![verb_list(&result.value_errors, home, "value", "values")],
        3 => vec![level3()],
        4 => {
            let headers: Vec<Vec<String>> = formula_errors
                .iter()
                .map(|c| {
                    let (col, row) = header_context(&bundle.reference, c);
                    col.into_iter().chain(row).collect()
                })
                .collect();
            let mut m = vec![level3()];
            m.extend(lookup_annotations(bundle, formula_errors, &headers));
            m
        }
        5 => details
            .iter()
            .map(|d| category_message(d, &d.cell.display_from(home)))
            .collect(),
        7 if force_quality => quality_messages,
        _ => details
            .iter()
            .flat_map(|d| hint_messages(d, &d.cell.display_from(home)))
            .collect(),
    };
    Ok(report)
}

/// Cells of a report's diagnoses; every cell named in its messages is among them.
pub fn diagnosed_cells(report: &FeedbackReport) -> Vec<&str> {
    report.diagnoses.iter().map(|d| d.cell.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLUTION: &[(&str, &str)] = &[
        ("A1", "Name"),
        ("B1", "Grades"),
        ("B2", "Ex. 1"),
        ("C2", "Ex. 2"),
        ("D2", "Final"),
        ("A3", "Anne"),
        ("A4", "John"),
        ("A5", "Tim"),
        ("A6", "Avg."),
        ("B3", "92"),
        ("C3", "58"),
        ("B4", "56"),
        ("C4", "70"),
        ("B5", "95"),
        ("C5", "75"),
        ("D3", "=(B3+C3)/2"),
        ("D4", "=(B4+C4)/2"),
        ("D5", "=(B5+C5)/2"),
        ("B6", "=AVG(B3:B5)"),
        ("C6", "=AVG(C3:C5)"),
        ("D6", "=AVG(D3:D5)"),
    ];

    fn workbook(overrides: &[(&'static str, &'static str)]) -> Workbook {
        let mut cells = SOLUTION.to_vec();
        for (a, c) in overrides {
            cells.retain(|(x, _)| x != a);
            cells.push((a, c));
        }
        Workbook::single_sheet("Sheet1", &cells)
    }

    fn at(s: &str) -> CellAddress {
        CellAddress::parse(s, "Sheet1").unwrap()
    }

    fn bundle() -> TaskBundle {
        let mut b = TaskBundle::new("grades", workbook(&[]));
        b.materials.push(MaterialEntry {
            title: "Calculating the average".into(),
            keywords: vec!["avg".into(), "average".into(), "mean".into()],
            reference: None,
        });
        b.quality.factor = 2.0;
        b
    }

    fn submission() -> Workbook {
        workbook(&[
            ("D3", "=(B3-C3)/2"),
            ("B6", "=(B3+B4+B5)/3"),
            ("C6", "=(C3+C4+D5)/3"),
            ("D6", "=(D3+D4+D5)/3"),
        ])
    }

    #[test]
    fn headers() {
        let wb = workbook(&[]);
        assert_eq!(header_context(&wb, &at("D3")), (Some("Final".into()), Some("Anne".into())));
        assert_eq!(header_context(&wb, &at("C6")), (Some("Ex. 2".into()), Some("Avg.".into())));
        assert_eq!(header_context(&Workbook::new("e"), &at("A1")), (None, None));
    }

    #[test]
    fn annotation_lookup() {
        let b = bundle();
        let m = lookup_annotations(&b, &[at("C6")], &[vec!["Ex. 2".into(), "Avg.".into()]]);
        assert_eq!(m, ["You should recall the info in the 'Calculating the average' tutorial."]);
        assert!(lookup_annotations(&b, &[at("D3")], &[vec!["Final".into(), "Anne".into()]]).is_empty());
        assert!(lookup_annotations(&TaskBundle::new("t", workbook(&[])), &[at("C6")], &[]).is_empty());
    }

    #[test]
    fn level_messages() {
        let b = bundle();
        let sub = submission();
        let msgs = |level, force| generate_feedback(&b, &sub, level, force).unwrap().messages;
        assert_eq!(msgs(1, false), ["The spreadsheet is incorrect."]);
        assert_eq!(msgs(2, false), ["The values of cells D3, C6, D6 are incorrect."]);
        assert_eq!(msgs(3, false), ["The formulas of cells D3, C6 are incorrect."]);
        assert_eq!(
            msgs(4, false),
            [
                "The formulas of cells D3, C6 are incorrect.",
                "You should recall the info in the 'Calculating the average' tutorial."
            ]
        );
        assert_eq!(msgs(5, false), ["An operator of cell D3 is incorrect.", "A reference of cell C6 is incorrect."]);
        assert_eq!(
            msgs(6, false),
            ["The operator '+' should be used in cell D3.", "The references C3:C5 should be used in cell C6."]
        );
        assert_eq!(msgs(7, false), msgs(6, false));
        assert_eq!(msgs(7, true), ["It is preferable to use an AVG-formula in cells B6, C6, D6."]);
    }

    #[test]
    fn pass_and_gates() {
        let b = bundle();
        let r = generate_feedback(&b, &workbook(&[]), 7, false).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.messages, ["The spreadsheet is correct."]);
        assert!(r.diagnoses.is_empty());
        let r = generate_feedback(&b, &submission(), 6, false).unwrap();
        assert_eq!(r.quality.len(), 1);
        assert!(!r.messages.iter().any(|m| m.contains("preferable")));
        assert!(matches!(generate_feedback(&b, &submission(), 0, false), Err(FeedbackError::Level(0))));
        assert!(matches!(generate_feedback(&b, &submission(), 8, false), Err(FeedbackError::Level(8))));
    }

    #[test]
    fn default_thresholds_flag_operator_count() {
        let mut b = bundle();
        b.quality = Default::default();
        let r = generate_feedback(&b, &submission(), 7, true).unwrap();
        assert!(r
            .quality
            .iter()
            .any(|f| matches!(f, Finding::MetricExceeded { metric, .. } if metric == "operator_total")));
    }

    #[test]
    fn syntax_gate() {
        let b = bundle();
        let sub = workbook(&[("D4", "=(B4+C4/2")]);
        let r = generate_feedback(&b, &sub, 6, true).unwrap();
        assert_eq!(r.status, Status::SyntaxError);
        assert!(r.diagnoses.is_empty() && r.quality.is_empty() && r.metrics.is_none());
        assert_eq!(r.syntax.len(), 1);
        assert_eq!(r.syntax[0].cell, "D4");
        assert_eq!(render_text(&r).lines().count(), 2);
        assert!(render_text(&r).starts_with("task grades: SYNTAX ERROR\n"));
    }

    #[test]
    fn diagnoses_are_complete_at_every_level() {
        let b = bundle();
        let r = generate_feedback(&b, &submission(), 1, false).unwrap();
        let kinds: Vec<_> = r.diagnoses.iter().map(|d| (d.cell.as_str(), d.kind)).collect();
        assert_eq!(
            kinds,
            [
                ("D3", DiagnosisKind::FormulaError),
                ("C6", DiagnosisKind::FormulaError),
                ("D6", DiagnosisKind::ValueError)
            ]
        );
        assert_eq!(r.diagnoses[1].detail.as_ref().unwrap().expected, ["C3:C5"]);
        assert_eq!(diagnosed_cells(&r), ["D3", "C6", "D6"]);
    }

    #[test]
    fn repair_hint_forms() {
        let b = TaskBundle::new("t", Workbook::single_sheet("S", &[("A1", "2"), ("B1", "=A1*$A$1+1"), ("C1", "=IF(A1>1,\"Total\",\"\")")]));
        let sub = Workbook::single_sheet("S", &[("A1", "2"), ("B1", "=A1*A1-1"), ("C1", "=IF(A1>1,\"Totel\",\"\")")]);
        let r = generate_feedback(&b, &sub, 6, false).unwrap();
        assert_eq!(
            r.messages,
            [
                "The operator '+' should be used in cell B1.",
                "The constant \"Total\" should be used in cell C1.",
                "Check the spelling of 'Totel' in cell C1; did you mean 'Total'?"
            ]
        );
        let sub = Workbook::single_sheet("S", &[("A1", "3"), ("B1", "=A1*A1+2"), ("C1", "=IF(A1>1,\"Total\",\"\")")]);
        let r = generate_feedback(&b, &sub, 6, false).unwrap();
        assert_eq!(
            r.messages,
            ["The constant 2 should be used in cell A1.", "Use the absolute reference $A$1 instead of A1 in cell B1."]
        );
    }
}
