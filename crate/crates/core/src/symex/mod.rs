//! Bounded dynamic symbolic execution over MiniC.

pub mod explore;
pub mod harness;
pub mod term;
pub mod testfile;

pub use explore::{
    classify_tests, explore, ExplorationReport, ExploreConfig, ExploreError, ExploreHook, Strategy, TestCase, TestKind,
};
pub use harness::{Domain, Harness, HarnessError};
pub use term::{solve, Conjunct, PathCondition, SolveError, Term, TermRef};
pub use testfile::{read_suite, write_suite, StoredKind, StoredTest};
