//! Built-in benchmark programs and the mode × criterion experiment matrix.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::coverage::{run_pipeline, PipelineConfig};
use crate::criteria::{annotate, Criterion};
use crate::instrument::Mode;
use crate::minic::{parse, typecheck, Program};
use crate::symex::Harness;

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: String,
    pub program: Program,
    pub harness: Harness,
    pub notes: &'static str,
}

const SOURCES: [(&str, &str, &str, &str); 7] = [
    ("power", include_str!("../bench/power.mc"), include_str!("../bench/power.harness"), "motivating example (exponentiation by squaring)"),
    ("search", include_str!("../bench/search.mc"), include_str!("../bench/search.harness"), "motivating example (linear search)"),
    ("tritype", include_str!("../bench/tritype.mc"), include_str!("../bench/tritype.harness"), "standard triangle classifier"),
    (
        "selection_sort",
        include_str!("../bench/selection_sort.mc"),
        include_str!("../bench/selection_sort.harness"),
        "standard selection sort on 3 elements",
    ),
    ("fourballs", include_str!("../bench/fourballs.mc"), include_str!("../bench/fourballs.harness"), "odd ball among four"),
    ("modulus", include_str!("../bench/modulus.mc"), include_str!("../bench/modulus.harness"), "remainder by subtraction"),
    ("check", include_str!("../bench/check.mc"), include_str!("../bench/check.harness"), "boundary fixture for LIMIT"),
];

/// All built-in benchmarks, in a fixed order.
pub fn builtin() -> Vec<Benchmark> {
    SOURCES
        .iter()
        .map(|(name, src, harness, notes)| {
            let program = parse(src).unwrap_or_else(|e| panic!("built-in {name}: {e}"));
            assert!(typecheck(&program).is_empty(), "built-in {name} does not typecheck");
            Benchmark {
                name: name.to_string(),
                program,
                harness: Harness::parse(harness).unwrap_or_else(|e| panic!("built-in {name}.harness: {e}")),
                notes,
            }
        })
        .collect()
}

pub fn by_name(name: &str) -> Option<Benchmark> {
    builtin().into_iter().find(|b| b.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metrics {
    pub program: String,
    pub criterion: String,
    pub mode: Mode,
    pub labels: usize,
    pub covered: usize,
    pub stmts_executed: u64,
    pub paths: u64,
    pub tests_gen: usize,
    pub tests_kept: usize,
    pub time_ms: u64,
    pub timed_out: bool,
    /// Set when the cell could not run; the counters are then meaningless.
    pub error: Option<String>,
}

impl Metrics {
    fn failed(b: &Benchmark, c: &Criterion, mode: Mode, labels: usize, error: String) -> Self {
        Metrics {
            program: b.name.clone(),
            criterion: c.to_string(),
            mode,
            labels,
            covered: 0,
            stmts_executed: 0,
            paths: 0,
            tests_gen: 0,
            tests_kept: 0,
            time_ms: 0,
            timed_out: false,
            error: Some(error),
        }
    }
}

pub fn run_cell(b: &Benchmark, c: &Criterion, mode: Mode, cfg: &PipelineConfig) -> Metrics {
    let ap = match annotate(&b.program, c) {
        Ok(ap) => ap,
        Err(e) => return Metrics::failed(b, c, mode, 0, e.to_string()),
    };
    let cfg = PipelineConfig { store_path: None, ..cfg.clone() };
    match run_pipeline::<crate::Int>(&ap, &b.harness, mode, &cfg) {
        Ok(r) => Metrics {
            program: b.name.clone(),
            criterion: c.to_string(),
            mode,
            labels: r.suite.total(),
            covered: r.suite.covered(),
            stmts_executed: r.exploration.stmts_executed,
            paths: r.exploration.paths(),
            tests_gen: r.suite.generated.len(),
            tests_kept: r.suite.kept.len(),
            time_ms: r.exploration.wall_time_ms,
            timed_out: r.exploration.timed_out,
            error: None,
        },
        Err(e) => Metrics::failed(b, c, mode, ap.labels.len(), e.to_string()),
    }
}

/// One row per (benchmark, criterion, mode), in that nesting order. Cells
/// run in parallel.
pub fn run_matrix(benchmarks: &[Benchmark], criteria: &[Criterion], modes: &[Mode], cfg: &PipelineConfig) -> Vec<Metrics> {
    let cells: Vec<(&Benchmark, &Criterion, Mode)> = benchmarks
        .iter()
        .flat_map(|b| criteria.iter().flat_map(move |c| modes.iter().map(move |m| (b, c, *m))))
        .collect();
    cells.par_iter().map(|(b, c, m)| run_cell(b, c, *m, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Tsv,
    Markdown,
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Tsv => "tsv",
            TableFormat::Markdown => "markdown",
        })
    }
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(TableFormat::Tsv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(format!("unknown table format `{s}`")),
        }
    }
}

pub const COLUMNS: [&str; 10] =
    ["program", "criterion", "mode", "labels", "covered", "paths", "tests_gen", "tests_kept", "time_ms", "timed_out"];

const MISSING: &str = "—";

fn cells(m: &Metrics) -> Vec<String> {
    let mut row = vec![m.program.clone(), m.criterion.clone(), m.mode.to_string()];
    if m.error.is_some() {
        row.push(if m.labels > 0 { m.labels.to_string() } else { MISSING.into() });
        row.extend(std::iter::repeat_n(MISSING.to_string(), 6));
        return row;
    }
    row.extend([
        m.labels.to_string(),
        m.covered.to_string(),
        m.paths.to_string(),
        m.tests_gen.to_string(),
        m.tests_kept.to_string(),
        if m.timed_out { "TO".into() } else { m.time_ms.to_string() },
        m.timed_out.to_string(),
    ]);
    row
}

pub fn render_table(rows: &[Metrics], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Tsv => {
            out.push_str(&COLUMNS.join("\t"));
            out.push('\n');
            for m in rows {
                out.push_str(&cells(m).join("\t"));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            out.push_str(&format!("| {} |\n", COLUMNS.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(COLUMNS.len())));
            for m in rows {
                out.push_str(&format!("| {} |\n", cells(m).join(" | ")));
            }
        }
    }
    out
}
