//! Command-line front-end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, render_table, TableFormat};
use crate::coverage::{greedy_reduce, run_pipeline, CoverageStore, PipelineConfig, Replayer, SuiteReport};
use crate::criteria::{annotate, AnnotatedProgram, Criterion, WmOp};
use crate::instrument::{transform, Mode};
use crate::minic::{parse, program_to_string, typecheck, Program};
use crate::scalar::{Exact, Scalar};
use crate::symex::{
    explore, read_suite, write_suite, ExplorationReport, ExploreConfig, Harness, Strategy, TestCase, TestKind,
};

/// Environment variable naming the coverage store file.
pub const STORE_ENV: &str = "LABELCOV_STORE";

#[derive(Debug, Parser)]
#[command(name = "labelcov", version, about = "Label coverage with bounded symbolic execution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the program with its coverage labels.
    Annotate(AnnotateArgs),
    /// Print the program instrumented for one mode.
    Instrument(InstrumentArgs),
    /// Explore the instrumented program and write the generated tests.
    Explore(ExploreArgs),
    /// Replay a directory of tests and report label coverage.
    Replay(ReplayArgs),
    /// Explore, replay and reduce: the full coverage pipeline.
    Cover(CoverArgs),
    /// Run the built-in benchmark matrix.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ProgramArgs {
    #[arg(long)]
    pub program: PathBuf,
    /// DC, CC, MCC, WM[:ABS,AOR,ROR,COR] or LIMIT[:N].
    #[arg(long, default_value = "DC")]
    pub criterion: String,
    /// Distance for a bare `LIMIT` criterion.
    #[arg(long)]
    pub limit_n: Option<u32>,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub harness: PathBuf,
    #[arg(long, default_value = "dfs")]
    pub strategy: Strategy,
    /// Per-run time budget in milliseconds.
    #[arg(long, default_value_t = 10_000)]
    pub time_budget: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_paths: u64,
    /// Use arbitrary-precision integers.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct InstrumentArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    #[arg(long, default_value = "optim")]
    pub mode: Mode,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    #[arg(long, default_value = "optim")]
    pub mode: Mode,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Only emit complete-path tests that reach new branches.
    #[arg(long)]
    pub covering_new: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Directory of `.kv` test files.
    #[arg(long)]
    pub tests: PathBuf,
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CoverArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    #[arg(long, default_value = "optim")]
    pub mode: Mode,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Delay each live replay commit by this many forks (optim only).
    #[arg(long, value_name = "FORKS")]
    pub async_replay: Option<u64>,
    /// Live coverage store file (optim only); `LABELCOV_STORE` overrides it.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated benchmark names; all built-ins by default.
    #[arg(long, value_delimiter = ',')]
    pub programs: Vec<String>,
    /// Criteria separated by `;`.
    #[arg(long, default_value = "DC;CC;MCC;WM", value_delimiter = ';')]
    pub criteria: Vec<String>,
    #[arg(long, default_value = "ignore,naive,tight,optim", value_delimiter = ',')]
    pub modes: Vec<Mode>,
    #[arg(long, default_value_t = 10_000)]
    pub time_budget: u64,
    #[arg(long, default_value = "dfs")]
    pub strategy: Strategy,
    #[arg(long, default_value = "tsv")]
    pub format: TableFormat,
    #[command(flatten)]
    pub out: OutArgs,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn diag(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 on success, 1 on usage errors, 2 on pipeline diagnostics.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let shown = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{shown}");
                    0
                }
                _ => {
                    let _ = write!(err, "{shown}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Annotate(a) => cmd_annotate(a, out),
        Command::Instrument(a) => cmd_instrument(a, out),
        Command::Explore(a) => cmd_explore(a, out),
        Command::Replay(a) => cmd_replay(a, out),
        Command::Cover(a) => cmd_cover(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    diag(format!("{}: {e}", path.display()))
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| diag(format!("stdout: {e}")))
}

pub fn parse_criterion(spec: &str, limit_n: Option<u32>) -> Result<Criterion, String> {
    let t = spec.trim().to_ascii_uppercase();
    let c = match t.as_str() {
        "WM" => Criterion::wm(&WmOp::ALL),
        "LIMIT" => Criterion::Limit(limit_n.ok_or("bare LIMIT needs --limit-n")?),
        _ => spec.parse::<Criterion>().map_err(|e| e.to_string())?,
    };
    if let Some(n) = limit_n {
        if c != Criterion::Limit(n) {
            return Err(format!("--limit-n {n} conflicts with criterion {c}"));
        }
    }
    Ok(c)
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let src = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    let p = parse(&src).map_err(|e| diag(format!("{}:{e}", path.display())))?;
    let diags = typecheck(&p);
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        return Err(diag(lines.join("\n")));
    }
    Ok(p)
}

fn load_annotated(a: &ProgramArgs) -> Result<AnnotatedProgram, Failure> {
    let c = parse_criterion(&a.criterion, a.limit_n).map_err(usage)?;
    let p = load_program(&a.program)?;
    annotate(&p, &c).map_err(|e| diag(format!("{}:{e}", a.program.display())))
}

fn load_harness(path: &Path) -> Result<Harness, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    Harness::parse(&text).map_err(|e| diag(format!("{}:{e}", path.display())))
}

/// Validates the output directory before any work is done.
fn prepare_out(o: &OutArgs) -> Result<Option<PathBuf>, Failure> {
    let Some(dir) = &o.out else { return Ok(None) };
    if dir.exists() {
        let nonempty = fs::read_dir(dir).map_err(|e| io_fail(dir, e))?.next().is_some();
        if nonempty && !o.force {
            return Err(usage(format!("{} is not empty (use --force to overwrite)", dir.display())));
        }
    }
    Ok(Some(dir.clone()))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_fail(path, e))
}

fn cmd_annotate(a: AnnotateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let dir = prepare_out(&a.out)?;
    let ap = load_annotated(&a.program)?;
    let src = ap.source();
    if let Some(dir) = dir {
        ensure_dir(&dir)?;
        write_file(&dir.join("annotated.mc"), &src)?;
        write_file(&dir.join("labels.tsv"), &ap.labels_tsv())?;
    }
    say(out, &src)
}

fn cmd_instrument(a: InstrumentArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let dir = prepare_out(&a.out)?;
    let ap = load_annotated(&a.program)?;
    let src = program_to_string(&transform(&ap, a.mode));
    if let Some(dir) = dir {
        ensure_dir(&dir)?;
        write_file(&dir.join("instrumented.mc"), &src)?;
        write_file(&dir.join("labels.tsv"), &ap.labels_tsv())?;
    }
    say(out, &src)
}

fn explore_config(s: &SearchArgs, covering_new: bool) -> ExploreConfig {
    ExploreConfig {
        strategy: s.strategy,
        time_budget_ms: s.time_budget,
        max_paths: s.max_paths,
        covering_new,
        ..ExploreConfig::default()
    }
}

fn summary<S>(r: &ExplorationReport<S>) -> String {
    let count = |f: fn(&TestKind) -> bool| r.tests.iter().filter(|t| f(&t.kind)).count();
    format!(
        "paths: {} complete, {} partial; tests: {} ({} complete, {} assert.err, {} rte.err){}\n",
        r.paths_complete,
        r.paths_partial,
        r.tests.len(),
        count(|k| *k == TestKind::Complete),
        count(|k| matches!(k, TestKind::AssertErr(_))),
        count(|k| matches!(k, TestKind::RteErr(_))),
        if r.timed_out { "; timed out" } else { "" },
    )
}

fn cmd_explore(a: ExploreArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if a.mode == Mode::Replayer {
        return Err(usage("the replayer mode cannot be explored"));
    }
    let dir = prepare_out(&a.out)?.ok_or_else(|| usage("explore needs -o <dir>"))?;
    let ap = load_annotated(&a.program)?;
    let h = load_harness(&a.search.harness)?;
    let p = transform(&ap, a.mode);
    let cfg = explore_config(&a.search, a.covering_new);
    fn go<S: Scalar>(p: &Program, h: &Harness, cfg: &ExploreConfig, dir: &Path) -> Result<String, Failure> {
        let r = explore::<S>(p, h, cfg, None).map_err(|e| diag(e.to_string()))?;
        write_suite(dir, &r).map_err(|e| io_fail(dir, e))?;
        Ok(summary(&r))
    }
    ensure_dir(&dir)?;
    write_file(&dir.join("labels.tsv"), &ap.labels_tsv())?;
    let text = if a.search.exact { go::<Exact>(&p, &h, &cfg, &dir)? } else { go::<crate::Int>(&p, &h, &cfg, &dir)? };
    say(out, &text)
}

fn store_override(flag: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os(STORE_ENV).map(PathBuf::from).or(flag)
}

fn coverage_line(s: &SuiteReport) -> String {
    format!("coverage: {}/{} labels, {} of {} tests kept\n", s.covered(), s.total(), s.kept.len(), s.generated.len())
}

fn cmd_replay(a: ReplayArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let dir = prepare_out(&a.out)?;
    let ap = load_annotated(&a.program)?;
    let stored = read_suite(&a.tests).map_err(|e| io_fail(&a.tests, e))?;
    let tests: Vec<TestCase> = stored
        .into_iter()
        .enumerate()
        .map(|(i, s)| TestCase { id: i + 1, assignment: s.assignment, kind: TestKind::Complete, path_len: 0, trace: Vec::new() })
        .collect();
    let mut store = match store_override(None) {
        Some(path) => CoverageStore::open(&path, ap.ids()).map_err(|e| io_fail(&path, e))?,
        None => CoverageStore::in_memory(ap.ids()),
    };
    let replayer = Replayer::new(&ap);
    let suite = if a.exact {
        greedy_reduce::<Exact>(&replayer, &tests, &mut store)
    } else {
        greedy_reduce::<crate::Int>(&replayer, &tests, &mut store)
    }
    .map_err(|e| diag(e.to_string()))?;
    if let Some(dir) = dir {
        suite.write(&dir).map_err(|e| io_fail(&dir, e))?;
    }
    say(out, &coverage_line(&suite))
}

fn cmd_cover(a: CoverArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if a.mode == Mode::Replayer {
        return Err(usage("the replayer mode cannot drive coverage"));
    }
    if a.async_replay.is_some() && a.mode != Mode::Optim {
        return Err(usage("--async-replay only applies to --mode optim"));
    }
    let dir = prepare_out(&a.out)?.ok_or_else(|| usage("cover needs -o <dir>"))?;
    let ap = load_annotated(&a.program)?;
    let h = load_harness(&a.search.harness)?;
    let cfg = PipelineConfig {
        explore: explore_config(&a.search, false),
        replay_delay_forks: a.async_replay.unwrap_or(0),
        store_path: store_override(a.store),
    };
    fn go<S: Scalar>(
        ap: &AnnotatedProgram,
        h: &Harness,
        mode: Mode,
        cfg: &PipelineConfig,
        dir: &Path,
    ) -> Result<String, Failure> {
        let r = run_pipeline::<S>(ap, h, mode, cfg).map_err(|e| diag(e.to_string()))?;
        write_suite(&dir.join("tests"), &r.exploration).map_err(|e| io_fail(dir, e))?;
        r.suite.write(dir).map_err(|e| io_fail(dir, e))?;
        Ok(format!("{}{}", summary(&r.exploration), coverage_line(&r.suite)))
    }
    ensure_dir(&dir)?;
    write_file(&dir.join("labels.tsv"), &ap.labels_tsv())?;
    let text = if a.search.exact {
        go::<Exact>(&ap, &h, a.mode, &cfg, &dir)?
    } else {
        go::<crate::Int>(&ap, &h, a.mode, &cfg, &dir)?
    };
    say(out, &text)
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let dir = prepare_out(&a.out)?;
    let criteria = a.criteria.iter().map(|c| parse_criterion(c, None)).collect::<Result<Vec<_>, _>>().map_err(usage)?;
    let all = bench::builtin();
    let benchmarks = if a.programs.is_empty() {
        all
    } else {
        let mut chosen = Vec::new();
        for name in &a.programs {
            chosen.push(all.iter().find(|b| &b.name == name).cloned().ok_or_else(|| usage(format!("unknown benchmark `{name}`")))?);
        }
        chosen
    };
    if criteria.is_empty() || a.modes.is_empty() {
        return Err(usage("bench needs at least one criterion and one mode"));
    }
    if a.modes.contains(&Mode::Replayer) {
        return Err(usage("the replayer mode cannot be benchmarked"));
    }
    let cfg = PipelineConfig {
        explore: ExploreConfig { strategy: a.strategy, time_budget_ms: a.time_budget, ..ExploreConfig::default() },
        ..PipelineConfig::default()
    };
    let rows = bench::run_matrix(&benchmarks, &criteria, &a.modes, &cfg);
    if let Some(dir) = dir {
        ensure_dir(&dir)?;
        write_file(&dir.join("matrix.tsv"), &render_table(&rows, TableFormat::Tsv))?;
    }
    say(out, &render_table(&rows, a.format))
}
