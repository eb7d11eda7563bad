//! Test-suite post-processing and the coverage report.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::replay::{ReplayError, Replayer};
use super::store::CoverageStore;
use crate::scalar::Scalar;
use crate::symex::testfile::kv_text;
use crate::symex::TestCase;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    /// The suite before reduction.
    pub generated: Vec<TestCase>,
    /// Tests kept because each newly covered at least one label.
    pub kept: Vec<TestCase>,
    pub per_label: BTreeMap<u32, bool>,
    pub coverage_ratio: f64,
}

impl SuiteReport {
    pub fn covered(&self) -> usize {
        self.per_label.values().filter(|c| **c).count()
    }

    pub fn covered_ids(&self) -> BTreeSet<u32> {
        self.per_label.iter().filter(|(_, c)| **c).map(|(id, _)| *id).collect()
    }

    pub fn total(&self) -> usize {
        self.per_label.len()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("label_id\tstatus\n");
        for (id, c) in &self.per_label {
            let _ = writeln!(s, "{id}\t{}", if *c { "covered" } else { "uncovered" });
        }
        let _ = writeln!(s, "#coverage {}/{}", self.covered(), self.total());
        s
    }

    /// Writes `report.tsv` and the kept tests as `kept_<n>.kv`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.tsv"), self.to_tsv())?;
        for (i, t) in self.kept.iter().enumerate() {
            fs::write(dir.join(format!("kept_{}.kv", i + 1)), kv_text(&t.assignment))?;
        }
        Ok(())
    }
}

/// Drops tests that repeat an earlier test on every input except the
/// `nondet_*` ones.
pub fn dedup_nondet(tests: &[TestCase]) -> Vec<TestCase> {
    let mut seen = HashSet::new();
    tests
        .iter()
        .filter(|t| {
            let key: Vec<(&String, &i64)> = t.assignment.iter().filter(|(k, _)| !k.starts_with("nondet_")).collect();
            seen.insert(format!("{key:?}"))
        })
        .cloned()
        .collect()
}

/// Replays `tests` in order against `store`, keeping each test whose normal
/// replay covered a new label.
pub fn greedy_reduce<S: Scalar>(
    replayer: &Replayer,
    tests: &[TestCase],
    store: &mut CoverageStore,
) -> Result<SuiteReport, ReplayError> {
    let mut kept = Vec::new();
    for t in tests {
        let r = replayer.replay::<S>(t, store)?;
        if r.normal && r.newly_covered > 0 {
            kept.push(t.clone());
        }
    }
    Ok(SuiteReport {
        generated: tests.to_vec(),
        kept,
        per_label: store.statuses().clone(),
        coverage_ratio: store.ratio(),
    })
}
