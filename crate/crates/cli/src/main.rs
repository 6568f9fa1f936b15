use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use sheetgrade::eval::Program;
use sheetgrade::feedback::{generate_feedback, render_json, render_text, FeedbackReport, Status, TaskBundle};
use sheetgrade::formula::{syntax_check, SyntaxReport};
use sheetgrade::graph::DependencyGraph;
use sheetgrade::model::{read_workbook, Workbook};
use sheetgrade::quality::compute_metrics;

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_SYNTAX: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "sheetgrade", version, about = "Grade spreadsheet submissions against a reference solution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grade one submission and print its feedback.
    Check {
        task: PathBuf,
        submission: PathBuf,
        #[command(flatten)]
        grading: Grading,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Grade every workbook in a directory; CSV summary on stdout.
    Batch {
        task: PathBuf,
        dir: PathBuf,
        #[command(flatten)]
        grading: Grading,
        /// File receiving one JSON report per line.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check that every formula of a workbook parses.
    Validate { workbook: PathBuf },
    /// Print the quality metrics of a workbook as JSON.
    Metrics { workbook: PathBuf },
    /// Print the dependency graph of a workbook in DOT format.
    Graph { workbook: PathBuf },
}

#[derive(Args)]
struct Grading {
    /// Feedback level, 1 to 7.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=7))]
    level: u8,
    /// Show quality feedback even when the submission is wrong.
    #[arg(long)]
    force_quality: bool,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn load_bundle(path: &Path, grading: &Grading) -> Result<TaskBundle> {
    let mut bundle = TaskBundle::load(path).with_context(|| format!("loading task {}", path.display()))?;
    if let Some(abs) = grading.abs_tol {
        bundle.tolerance.abs = abs;
    }
    if let Some(rel) = grading.rel_tol {
        bundle.tolerance.rel = rel;
    }
    bundle.validate().context("tolerance override")?;
    Ok(bundle)
}

fn load_workbook(path: &Path) -> Result<Workbook> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    read_workbook(&text).with_context(|| format!("cannot load workbook {}", path.display()))
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Pass => EXIT_PASS,
        Status::Fail => EXIT_FAIL,
        Status::SyntaxError => EXIT_SYNTAX,
    }
}

fn grade(bundle: &TaskBundle, path: &Path, grading: &Grading) -> Result<FeedbackReport> {
    let submission = load_workbook(path)?;
    Ok(generate_feedback(bundle, &submission, grading.level, grading.force_quality)?)
}

fn check(task: &Path, submission: &Path, grading: &Grading, format: Format) -> Result<u8> {
    let bundle = load_bundle(task, grading)?;
    let report = grade(&bundle, submission, grading)?;
    let mut out = std::io::stdout().lock();
    match format {
        Format::Text => writeln!(out, "{}", render_text(&report))?,
        Format::Json => write!(out, "{}", render_json(&report))?,
    }
    Ok(status_code(report.status))
}

#[derive(Serialize)]
struct BatchLine<'a> {
    file: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a FeedbackReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn submissions(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot read directory {}", dir.display()))? {
        let path = entry?.path();
        let hidden = path.file_name().and_then(|n| n.to_str()).is_none_or(|n| n.starts_with('.'));
        let workbook = matches!(path.extension().and_then(|e| e.to_str()), Some("wb" | "json"));
        if path.is_file() && workbook && !hidden {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn batch(task: &Path, dir: &Path, grading: &Grading, out: &Path) -> Result<u8> {
    let bundle = load_bundle(task, grading)?;
    let files = submissions(dir)?;
    let results: Vec<Result<FeedbackReport>> = files.par_iter().map(|f| grade(&bundle, f, grading)).collect();

    let mut lines = String::new();
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["file", "status", "value_errors", "formula_errors"])?;
    for (path, result) in files.iter().zip(&results) {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let stem = path.file_stem().and_then(|n| n.to_str()).unwrap_or_default();
        let line = match result {
            Ok(report) => {
                let status = match report.status {
                    Status::Pass => "pass",
                    Status::Fail => "fail",
                    Status::SyntaxError => "syntax_error",
                };
                csv.write_record([
                    stem,
                    status,
                    &report.value_error_count().to_string(),
                    &report.formula_error_count().to_string(),
                ])?;
                BatchLine { file: name, report: Some(report), error: None }
            }
            Err(e) => {
                csv.write_record([stem, "error", "", ""])?;
                BatchLine { file: name, report: None, error: Some(format!("{e:#}")) }
            }
        };
        lines.push_str(&serde_json::to_string(&line)?);
        lines.push('\n');
    }
    fs::write(out, lines).with_context(|| format!("cannot write {}", out.display()))?;
    std::io::stdout().write_all(&csv.into_inner()?)?;
    Ok(EXIT_PASS)
}

fn print_syntax(wb: &Workbook, report: &SyntaxReport) {
    let home = wb.primary_sheet();
    for issue in &report.errors {
        eprintln!("{}: {} (position {})", issue.cell.display_from(home), issue.message, issue.position);
    }
}

fn clean_workbook(path: &Path) -> Result<std::result::Result<Workbook, u8>> {
    let wb = load_workbook(path)?;
    let report = syntax_check(&wb);
    if report.is_clean() {
        Ok(Ok(wb))
    } else {
        print_syntax(&wb, &report);
        Ok(Err(EXIT_SYNTAX))
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check { task, submission, grading, format } => check(&task, &submission, &grading, format),
        Command::Batch { task, dir, grading, out } => batch(&task, &dir, &grading, &out),
        Command::Validate { workbook } => {
            let wb = load_workbook(&workbook)?;
            let report = syntax_check(&wb);
            if report.is_clean() {
                println!("ok");
                return Ok(EXIT_PASS);
            }
            let home = wb.primary_sheet();
            for issue in &report.errors {
                println!("{}: {} (position {})", issue.cell.display_from(home), issue.message, issue.position);
            }
            Ok(EXIT_SYNTAX)
        }
        Command::Metrics { workbook } => {
            let wb = match clean_workbook(&workbook)? {
                Ok(wb) => wb,
                Err(code) => return Ok(code),
            };
            let program = Program::compile(&wb);
            let grid = program.evaluate();
            let metrics = compute_metrics(&wb, &DependencyGraph::from_program(&program, &grid), &grid);
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            Ok(EXIT_PASS)
        }
        Command::Graph { workbook } => {
            let wb = match clean_workbook(&workbook)? {
                Ok(wb) => wb,
                Err(code) => return Ok(code),
            };
            let program = Program::compile(&wb);
            let grid = program.evaluate();
            print!("{}", DependencyGraph::from_program(&program, &grid).export_dot());
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn level_is_range_checked() {
        assert!(Cli::try_parse_from(["sheetgrade", "check", "t", "s", "--level", "8"]).is_err());
        assert!(Cli::try_parse_from(["sheetgrade", "check", "t", "s", "--level", "7"]).is_ok());
        assert!(Cli::try_parse_from(["sheetgrade", "batch", "t", "d"]).is_err());
    }

    #[test]
    fn exit_codes_follow_status() {
        assert_eq!(status_code(Status::Pass), 0);
        assert_eq!(status_code(Status::Fail), 1);
        assert_eq!(status_code(Status::SyntaxError), 2);
    }
}
