//! On-disk test suites: `test_NNNNNN.kv` files, `.assert.err` / `.rte.err`
//! markers and a `stats.txt` summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::explore::{ExplorationReport, TestCase, TestKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoredKind {
    Complete,
    AssertErr,
    RteErr,
}

impl From<TestKind> for StoredKind {
    fn from(k: TestKind) -> Self {
        match k {
            TestKind::Complete => StoredKind::Complete,
            TestKind::AssertErr(_) => StoredKind::AssertErr,
            TestKind::RteErr(_) => StoredKind::RteErr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredTest {
    pub path: PathBuf,
    pub assignment: BTreeMap<String, i64>,
    pub kind: StoredKind,
}

pub fn test_stem(n: usize) -> String {
    format!("test_{n:06}")
}

pub fn kv_text(assignment: &BTreeMap<String, i64>) -> String {
    let mut s = String::new();
    for (k, v) in assignment {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, i64>, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected name=value", i + 1))?;
        let v = v.trim().parse().map_err(|_| format!("line {}: `{}` is not an integer", i + 1, v.trim()))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Writes one `.kv` file per test (numbered from 1 in emission order) plus
/// markers for error tests, and `stats.txt`.
pub fn write_suite<S>(dir: &Path, report: &ExplorationReport<S>) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (i, t) in report.tests.iter().enumerate() {
        write_test(dir, i + 1, t)?;
    }
    fs::write(dir.join("stats.txt"), stats_text(report))
}

pub fn write_test(dir: &Path, n: usize, t: &TestCase) -> io::Result<()> {
    let stem = test_stem(n);
    fs::write(dir.join(format!("{stem}.kv")), kv_text(&t.assignment))?;
    match t.kind {
        TestKind::Complete => Ok(()),
        TestKind::AssertErr(_) => fs::write(dir.join(format!("{stem}.assert.err")), ""),
        TestKind::RteErr(_) => fs::write(dir.join(format!("{stem}.rte.err")), ""),
    }
}

pub fn stats_text<S>(r: &ExplorationReport<S>) -> String {
    let fields: [(&str, String); 12] = [
        ("tests", r.tests.len().to_string()),
        ("paths_complete", r.paths_complete.to_string()),
        ("paths_partial", r.paths_partial.to_string()),
        ("forks", r.forks.to_string()),
        ("solver_calls", r.solver_calls.to_string()),
        ("stmts_executed", r.stmts_executed.to_string()),
        ("assertion_checks", r.assertion_checks.to_string()),
        ("skipped_checks", r.skipped_checks.to_string()),
        ("wall_time_ms", r.wall_time_ms.to_string()),
        ("timed_out", r.timed_out.to_string()),
        ("path_limit_hit", r.path_limit_hit.to_string()),
        ("assert_err", r.tests.iter().filter(|t| matches!(t.kind, TestKind::AssertErr(_))).count().to_string()),
    ];
    fields.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn parse_stats(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Reads every `*.kv` file of `dir` in name order.
pub fn read_suite(dir: &Path) -> io::Result<Vec<StoredTest>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "kv"));
    paths.sort();
    paths.into_iter().map(|p| read_test(&p)).collect()
}

pub fn read_test(path: &Path) -> io::Result<StoredTest> {
    let text = fs::read_to_string(path)?;
    let assignment = parse_kv(&text)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
    let marker = |ext: &str| path.with_extension(ext).exists();
    let kind = if marker("assert.err") {
        StoredKind::AssertErr
    } else if marker("rte.err") {
        StoredKind::RteErr
    } else {
        StoredKind::Complete
    };
    Ok(StoredTest { path: path.to_path_buf(), assignment, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::RteKind;

    fn case(kind: TestKind, a: i64) -> TestCase {
        TestCase { id: 0, assignment: BTreeMap::from([("a".into(), a), ("t[0]".into(), -3)]), kind, path_len: 1, trace: vec![] }
    }

    #[test]
    fn suite_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = ExplorationReport::<i128> {
            tests: vec![case(TestKind::Complete, 1), case(TestKind::AssertErr(4), 2), case(TestKind::RteErr(RteKind::DivByZero), 0)],
            paths_complete: 1,
            ..Default::default()
        };
        write_suite(dir.path(), &r).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("test_000002.kv")).unwrap(), "a=2\nt[0]=-3\n");
        let back = read_suite(dir.path()).unwrap();
        let kinds: Vec<_> = back.iter().map(|t| t.kind).collect();
        assert_eq!(kinds, [StoredKind::Complete, StoredKind::AssertErr, StoredKind::RteErr]);
        assert_eq!(back[1].assignment, r.tests[1].assignment);
        let stats = parse_stats(&fs::read_to_string(dir.path().join("stats.txt")).unwrap());
        assert_eq!(stats["paths_complete"], "1");
        assert_eq!(stats["timed_out"], "false");
    }

    #[test]
    fn bad_kv() {
        assert!(parse_kv("a=1\nb\n").is_err());
        assert!(parse_kv("a=x").is_err());
        assert_eq!(parse_kv("\n b = -2 \n").unwrap()["b"], -2);
    }
}
