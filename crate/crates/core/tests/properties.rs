mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng;

use sheetgrade::diff::{diff_formula, Category};
use sheetgrade::eval::{eval_formula, evaluate, values_equal, Program, Tolerance};
use sheetgrade::feedback::{generate_feedback, DiagnosisKind, Status, TaskBundle};
use sheetgrade::fixtures::corpus::{self, columns, mutate, random_workbook, with_formula, LARGE, SHEET, SMALL};
use sheetgrade::fixtures::load_fixture;
use sheetgrade::formula::{canonicalize, parse_formula, references_of};
use sheetgrade::graph::DependencyGraph;
use sheetgrade::matching::{match_values, Phase};
use sheetgrade::model::{read_workbook, write_workbook, CellAddress, CellContent, ErrorKind, Value, Workbook};
use sheetgrade::quality::{compare_metrics, compute_metrics, QualityConfig, QualityMetrics};

use common::{fixed_point, formula_cells, grid_diff};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 128, ..ProptestConfig::default() }
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Blank),
        (-1e6f64..1e6).prop_map(Value::Number),
        "[a-zA-Z ]{0,6}".prop_map(Value::Text),
        any::<bool>().prop_map(Value::Boolean),
        prop_oneof![
            Just(ErrorKind::Cycle),
            Just(ErrorKind::BadRef),
            Just(ErrorKind::DivZero),
            Just(ErrorKind::BadValue)
        ]
        .prop_map(Value::Error),
    ]
}

/// Up to three value-changing or neutral mutations of random formula cells.
fn mutated(wb: &Workbook, seed: u64, count: usize) -> Workbook {
    let mut rng = corpus::rng(seed ^ 0x5eed);
    let cells = formula_cells(wb);
    let mut out = wb.clone();
    if cells.is_empty() {
        return out;
    }
    for _ in 0..count {
        let (addr, _) = &cells[rng.random_range(0..cells.len())];
        let current = parse_formula(match out.get(addr) {
            Some(CellContent::Formula(src)) => src,
            _ => continue,
        })
        .unwrap();
        if let Some((m, _)) = mutate(&current, addr, columns(wb), &mut rng) {
            out = with_formula(&out, addr, &m);
        }
    }
    out
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn evaluate_matches_fixed_point(seed in any::<u64>()) {
        let wb = random_workbook(seed, SMALL);
        let grid = evaluate(&wb);
        for (addr, v) in fixed_point(&wb) {
            prop_assert_eq!(grid.get(&addr), v, "{}", addr);
        }
        prop_assert_eq!(evaluate(&wb), grid);
    }

    #[test]
    fn evaluation_ignores_insertion_order(seed in any::<u64>()) {
        let wb = random_workbook(seed, SMALL);
        let mut cells: Vec<_> = wb.cells().map(|(a, c)| (a.clone(), c.clone())).collect();
        cells.reverse();
        let mut rebuilt = Workbook::new(wb.name.clone());
        for (a, c) in cells {
            rebuilt.set(a, c);
        }
        prop_assert_eq!(evaluate(&rebuilt), evaluate(&wb));
    }

    #[test]
    fn canonical_forms(seed in any::<u64>()) {
        let wb = random_workbook(seed, SMALL);
        let grid = evaluate(&wb);
        let lookup = |a: &CellAddress| grid.get(a);
        for (addr, ast) in formula_cells(&wb) {
            let canon = canonicalize(&ast).unwrap();
            prop_assert_eq!(&canonicalize(&canon).unwrap(), &canon);
            let original = eval_formula(&ast, SHEET, &lookup);
            let rewritten = eval_formula(&canon, SHEET, &lookup);
            prop_assert!(values_equal(&original, &rewritten, &Tolerance::default()),
                "{} {} -> {}: {} vs {}", addr, ast, canon, original, rewritten);
            let refs: BTreeSet<_> = references_of(&ast, SHEET).unwrap().into_iter().collect();
            let canon_refs: BTreeSet<_> = references_of(&canon, SHEET).unwrap().into_iter().collect();
            prop_assert_eq!(refs, canon_refs);
            let printed = ast.to_formula();
            prop_assert_eq!(parse_formula(&printed).unwrap(), ast.clone());
            let spaced = printed.replace('+', " + ").replace(',', " , ");
            prop_assert_eq!(parse_formula(&spaced).unwrap(), ast);
        }
    }

    #[test]
    fn workbook_files_round_trip(seed in any::<u64>()) {
        let wb = random_workbook(seed, LARGE);
        let back = read_workbook(&write_workbook(&wb)).unwrap();
        prop_assert_eq!(&back, &wb);
        let outside = CellAddress::new(SHEET, 20, 20);
        prop_assert_eq!(back.constant(&outside), Some(Value::Blank));
    }

    #[test]
    fn graph_invariants(seed in any::<u64>(), extra in any::<bool>()) {
        let mut wb = random_workbook(seed, SMALL);
        if extra {
            // an arbitrary, possibly backward-pointing reference may close a cycle
            let mut rng = corpus::rng(seed);
            let cols = columns(&wb);
            let rows = wb.cells().map(|(a, _)| a.row).max().unwrap();
            let from = CellAddress::new(SHEET, rng.random_range(1..=cols), rng.random_range(1..=rows));
            let to = CellAddress::new(SHEET, rng.random_range(1..=cols), rng.random_range(1..=rows));
            wb.set(from, CellContent::Formula(format!("={}+1", to.a1())));
        }
        let grid = evaluate(&wb);
        let graph = DependencyGraph::build(&wb, &grid);
        let expected_edges: usize = formula_cells(&wb)
            .iter()
            .map(|(a, ast)| references_of(ast, &a.sheet).unwrap().len())
            .sum();
        prop_assert_eq!(graph.edge_count(), expected_edges);
        let (outputs, inputs) = graph.terminals();
        let targets: BTreeSet<_> = graph.edges().map(|(_, to)| to.clone()).collect();
        let sources: BTreeSet<_> = graph.edges().map(|(from, _)| from.clone()).collect();
        let brute_out: Vec<_> = graph.nodes().filter(|n| !targets.contains(*n)).cloned().collect();
        let brute_in: Vec<_> = graph.nodes().filter(|n| !sources.contains(*n)).cloned().collect();
        prop_assert_eq!(outputs, brute_out);
        prop_assert_eq!(inputs, brute_in);
        let has_cycle_value = grid.iter().any(|(_, v)| *v == Value::Error(ErrorKind::Cycle));
        prop_assert_eq!(graph.longest_chain().is_err(), has_cycle_value);
    }

    #[test]
    fn matching_properties(seed in any::<u64>(), count in 1usize..4) {
        let solution = random_workbook(seed, SMALL);
        let submission = mutated(&solution, seed, count);
        let tol = Tolerance::default();
        let result = match_values(&solution, &submission, &tol, None);

        // every formula error is a value error
        for f in &result.formula_errors {
            prop_assert!(result.value_errors.contains(f));
        }

        // value errors are exactly the differing graph nodes
        let sol_grid = evaluate(&solution);
        let sub_grid = evaluate(&submission);
        let graph = DependencyGraph::build(&solution, &sol_grid);
        let diff: Vec<_> = grid_diff(&sol_grid, &sub_grid, &tol)
            .into_iter()
            .filter(|c| graph.contains(c))
            .collect();
        prop_assert_eq!(&result.value_errors, &diff);

        // each node is compared once on first visit
        let firsts: Vec<_> = result.trace.iter().filter(|t| t.phase == Phase::FirstCompare).map(|t| &t.cell).collect();
        let unique: BTreeSet<_> = firsts.iter().collect();
        prop_assert_eq!(firsts.len(), unique.len());
        prop_assert_eq!(firsts.len(), graph.node_count());

        // a formula error stays wrong even with all of its inputs corrected
        let sub_program = Program::compile(&submission);
        for f in &result.formula_errors {
            let below = graph.descendants(f);
            let lookup = |a: &CellAddress| if below.contains(a) { sol_grid.get(a) } else { sub_grid.get(a) };
            let own = match sub_program.formula(f) {
                Some(ast) => eval_formula(ast, SHEET, &lookup),
                None => sub_grid.get(f),
            };
            prop_assert!(!values_equal(&own, &sol_grid.get(f), &tol), "{}", f);
        }

        // deterministic
        let again = match_values(&solution, &submission, &tol, None);
        prop_assert_eq!(again.value_errors, result.value_errors);
        prop_assert_eq!(again.formula_errors, result.formula_errors);
    }

    #[test]
    fn self_diff_is_empty(seed in any::<u64>()) {
        let wb = random_workbook(seed, SMALL);
        for (addr, content) in wb.cells() {
            let d = diff_formula(addr, Some(content), Some(content), &Tolerance::default());
            if content.is_formula() {
                prop_assert_eq!(d.category, Category::Unclassified);
                prop_assert!(d.expected.is_empty() && d.found.is_empty() && d.extras.is_empty());
            }
        }
    }

    #[test]
    fn reference_repairs_restore_the_value(seed in any::<u64>()) {
        let solution = random_workbook(seed, SMALL);
        let mut rng = corpus::rng(seed);
        let sol_grid = evaluate(&solution);
        for (addr, ast) in formula_cells(&solution) {
            let Some((m, corpus::MutationKind::Reference)) = mutate(&ast, &addr, columns(&solution), &mut rng) else {
                continue;
            };
            let d = diff_formula(&addr, solution.get(&addr), Some(&CellContent::Formula(m.to_formula())), &Tolerance::default());
            let text = m.to_formula();
            let unique = d.found.iter().all(|f| replace_ref(&text, f, "\u{1}").matches('\u{1}').count() == 1);
            if d.category != Category::Reference
                || d.expected.len() != d.found.len()
                || d.expected.iter().any(|e| e.contains(':'))
                || !unique
            {
                continue;
            }
            let mut fixed = text;
            for (e, f) in d.expected.iter().zip(&d.found) {
                fixed = replace_ref(&fixed, f, e);
            }
            let repaired = parse_formula(&fixed).unwrap();
            let lookup = |a: &CellAddress| sol_grid.get(a);
            let value = eval_formula(&repaired, SHEET, &lookup);
            prop_assert!(values_equal(&value, &sol_grid.get(&addr), &Tolerance::default()),
                "{}: {} repaired to {}", addr, m, fixed);
        }
    }

    #[test]
    fn metric_comparison_is_reflexive(seed in any::<u64>(), factor in 1.0f64..4.0, offset in 0.0f64..3.0) {
        let wb = random_workbook(seed, LARGE);
        let grid = evaluate(&wb);
        let graph = DependencyGraph::build(&wb, &grid);
        let m = compute_metrics(&wb, &graph, &grid);
        let cfg = QualityConfig { factor, offset, ..QualityConfig::default() };
        prop_assert!(compare_metrics(&m, &m, &cfg).is_empty());
        prop_assert_eq!(Ok(m.longest_chain), graph.longest_chain());
        prop_assert_eq!(m.formula_cell_count + m.value_cell_count, wb.cell_count());
    }

    #[test]
    fn values_equal_reflexive_and_symmetric(a in value(), b in value()) {
        let t = Tolerance::default();
        prop_assert!(values_equal(&a, &a, &t));
        prop_assert_eq!(values_equal(&a, &b, &t), values_equal(&b, &a, &t));
    }

    #[test]
    fn self_grading_passes(seed in any::<u64>()) {
        let wb = random_workbook(seed, LARGE);
        let r = match_values(&wb, &wb, &Tolerance::default(), None);
        prop_assert!(r.value_errors.is_empty() && r.formula_errors.is_empty());
        let report = generate_feedback(&TaskBundle::new("t", wb.clone()), &wb, 1, false).unwrap();
        prop_assert_eq!(report.status, Status::Pass);
    }
}

/// Replaces whole-token occurrences of a cell reference in formula text.
fn replace_ref(formula: &str, from: &str, to: &str) -> String {
    let mut out = String::new();
    let mut rest = formula;
    while let Some(i) = rest.find(from) {
        let before_ok = !rest[..i].ends_with(|c: char| c.is_ascii_alphanumeric() || c == '$');
        let after = &rest[i + from.len()..];
        let after_ok = !after.starts_with(|c: char| c.is_ascii_alphanumeric());
        out.push_str(&rest[..i]);
        out.push_str(if before_ok && after_ok { to } else { from });
        rest = after;
    }
    out.push_str(rest);
    out
}

#[test]
fn metrics_ignore_insertion_order() {
    let f = load_fixture("grades").unwrap();
    let wb = &f.submission;
    let mut cells: Vec<_> = wb.cells().map(|(a, c)| (a.clone(), c.clone())).collect();
    cells.reverse();
    let mut rebuilt = Workbook::new(wb.name.clone());
    for (a, c) in cells {
        rebuilt.set(a, c);
    }
    let metrics = |w: &Workbook| -> QualityMetrics {
        let g = evaluate(w);
        compute_metrics(w, &DependencyGraph::build(w, &g), &g)
    };
    assert_eq!(metrics(&rebuilt), metrics(wb));
}

#[test]
fn fixture_level_consistency() {
    let f = load_fixture("grades").unwrap();
    let l2 = generate_feedback(&f.bundle, &f.submission, 2, false).unwrap();
    let l3 = generate_feedback(&f.bundle, &f.submission, 3, false).unwrap();
    let value_cells: Vec<&str> = l2.diagnoses.iter().map(|d| d.cell.as_str()).collect();
    let formula_cells: Vec<&str> = l3
        .diagnoses
        .iter()
        .filter(|d| d.kind == DiagnosisKind::FormulaError)
        .map(|d| d.cell.as_str())
        .collect();
    assert!(formula_cells.iter().all(|c| value_cells.contains(c)));
    for level in 1..=7 {
        let r = generate_feedback(&f.bundle, &f.submission, level, false).unwrap();
        assert!(!r.messages.iter().any(|m| m.contains("preferable")), "level {level}");
    }
}
