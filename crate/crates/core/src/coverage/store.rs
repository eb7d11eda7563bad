//! The persistent label-status store.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Where a simulated crash interrupts a commit.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitFault {
    /// The temporary file is left half written.
    MidWrite,
    /// The temporary file is complete but never renamed.
    BeforeRename,
}

/// Label id to covered flag. Flags only ever go from uncovered to covered.
/// File-backed stores rewrite their file on every commit through a temporary
/// file and a rename, so a reader sees either the old or the new contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageStore {
    path: Option<PathBuf>,
    statuses: BTreeMap<u32, bool>,
    fault: Option<CommitFault>,
}

impl CoverageStore {
    pub fn in_memory(ids: impl IntoIterator<Item = u32>) -> Self {
        CoverageStore { path: None, statuses: ids.into_iter().map(|id| (id, false)).collect(), fault: None }
    }

    /// Opens the store at `path`, creating it if absent. Covered flags found
    /// in an existing file are kept; ids missing from it start uncovered.
    pub fn open(path: &Path, ids: impl IntoIterator<Item = u32>) -> io::Result<Self> {
        let mut statuses: BTreeMap<u32, bool> = ids.into_iter().map(|id| (id, false)).collect();
        if path.exists() {
            let text = fs::read_to_string(path)?;
            for (id, covered) in parse_store(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))? {
                *statuses.entry(id).or_insert(false) |= covered;
            }
        }
        let store = CoverageStore { path: Some(path.to_path_buf()), statuses, fault: None };
        store.persist(&store.statuses)?;
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn is_covered(&self, id: u32) -> bool {
        self.statuses.get(&id).copied().unwrap_or(false)
    }

    pub fn statuses(&self) -> &BTreeMap<u32, bool> {
        &self.statuses
    }

    pub fn total(&self) -> usize {
        self.statuses.len()
    }

    pub fn covered_count(&self) -> usize {
        self.statuses.values().filter(|c| **c).count()
    }

    pub fn covered_ids(&self) -> BTreeSet<u32> {
        self.statuses.iter().filter(|(_, c)| **c).map(|(id, _)| *id).collect()
    }

    /// Covered fraction; a store with no labels counts as fully covered.
    pub fn ratio(&self) -> f64 {
        if self.statuses.is_empty() {
            1.0
        } else {
            self.covered_count() as f64 / self.total() as f64
        }
    }

    /// Marks `ids` covered as one batch and returns how many were new. On
    /// error nothing changes, in memory or on disk.
    pub fn commit(&mut self, ids: &BTreeSet<u32>) -> io::Result<usize> {
        let fresh: Vec<u32> = ids.iter().copied().filter(|id| !self.is_covered(*id)).collect();
        if fresh.is_empty() {
            return Ok(0);
        }
        let mut next = self.statuses.clone();
        for id in &fresh {
            next.insert(*id, true);
        }
        self.persist(&next)?;
        self.statuses = next;
        Ok(fresh.len())
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: Option<CommitFault>) {
        self.fault = fault;
    }

    pub fn to_text(&self) -> String {
        store_text(&self.statuses)
    }

    fn persist(&self, statuses: &BTreeMap<u32, bool>) -> io::Result<()> {
        let Some(path) = &self.path else {
            return match self.fault {
                Some(_) => Err(io::Error::other("injected commit fault")),
                None => Ok(()),
            };
        };
        let text = store_text(statuses);
        let tmp = temp_path(path);
        match self.fault {
            Some(CommitFault::MidWrite) => {
                fs::write(&tmp, &text.as_bytes()[..text.len() / 2])?;
                return Err(io::Error::other("injected fault while writing the store"));
            }
            Some(CommitFault::BeforeRename) => {
                fs::write(&tmp, &text)?;
                return Err(io::Error::other("injected fault before renaming the store"));
            }
            None => {}
        }
        fs::write(&tmp, &text)?;
        fs::rename(&tmp, path)
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

fn store_text(statuses: &BTreeMap<u32, bool>) -> String {
    let mut s = String::new();
    for (id, covered) in statuses {
        let _ = writeln!(s, "{id} {}", u8::from(*covered));
    }
    s
}

pub fn parse_store(text: &str) -> Result<BTreeMap<u32, bool>, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || format!("store line {}: expected `<id> <0|1>`", i + 1);
        let (id, flag) = line.split_once(' ').ok_or_else(bad)?;
        let id: u32 = id.parse().map_err(|_| bad())?;
        let covered = match flag.trim() {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        out.insert(id, covered);
    }
    Ok(out)
}
