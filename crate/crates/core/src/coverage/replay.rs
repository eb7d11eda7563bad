//! Concrete replay of tests against the label table.

use std::collections::BTreeSet;

use thiserror::Error;

use super::store::CoverageStore;
use crate::criteria::AnnotatedProgram;
use crate::instrument::{transform, Mode};
use crate::minic::{interpret, InterpError, LabelHook, Outcome, Program, DEFAULT_STEP_LIMIT};
use crate::scalar::Scalar;
use crate::symex::TestCase;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("coverage store: {0}")]
    Store(#[from] std::io::Error),
}

/// Labels seen covered during one run, committed only on normal return.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayBuffer {
    pub staged: BTreeSet<u32>,
}

impl LabelHook for ReplayBuffer {
    fn on_set_covered(&mut self, id: u32) {
        self.staged.insert(id);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayResult<S> {
    pub normal: bool,
    pub covered: BTreeSet<u32>,
    /// Labels the commit newly marked (always 0 when `normal` is false).
    pub newly_covered: usize,
    pub outcome: Outcome<S>,
}

/// Holds the replayer instrumentation of an annotated program.
#[derive(Debug, Clone)]
pub struct Replayer {
    program: Program,
    step_limit: u64,
}

impl Replayer {
    pub fn new(ap: &AnnotatedProgram) -> Self {
        Replayer { program: transform(ap, Mode::Replayer), step_limit: DEFAULT_STEP_LIMIT }
    }

    pub fn with_step_limit(mut self, limit: u64) -> Self {
        self.step_limit = limit;
        self
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    /// Runs `t` without touching any store.
    pub fn run<S: Scalar>(&self, t: &TestCase) -> Result<(ReplayBuffer, Outcome<S>), ReplayError> {
        let mut buf = ReplayBuffer::default();
        let ex = interpret::<S>(&self.program, &t.inputs(&self.program), Some(&mut buf), self.step_limit)?;
        Ok((buf, ex.outcome))
    }

    pub fn replay<S: Scalar>(&self, t: &TestCase, store: &mut CoverageStore) -> Result<ReplayResult<S>, ReplayError> {
        let (buf, outcome) = self.run::<S>(t)?;
        let normal = outcome.is_normal();
        let newly_covered = if normal { store.commit(&buf.staged)? } else { 0 };
        Ok(ReplayResult { normal, covered: buf.staged, newly_covered, outcome })
    }
}

pub fn replay<S: Scalar>(
    ap: &AnnotatedProgram,
    t: &TestCase,
    store: &mut CoverageStore,
) -> Result<ReplayResult<S>, ReplayError> {
    Replayer::new(ap).replay(t, store)
}
