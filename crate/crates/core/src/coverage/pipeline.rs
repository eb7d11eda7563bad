//! Explore, filter, replay and reduce: one full coverage run.

use std::collections::VecDeque;
use std::marker::PhantomData;
use std::path::PathBuf;

use thiserror::Error;

use super::replay::{ReplayError, Replayer};
use super::store::CoverageStore;
use super::suite::{dedup_nondet, greedy_reduce, SuiteReport};
use crate::criteria::AnnotatedProgram;
use crate::instrument::{transform, Mode};
use crate::scalar::Scalar;
use crate::symex::{classify_tests, explore, ExplorationReport, ExploreConfig, ExploreError, ExploreHook, Harness, TestCase, TestKind};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineConfig {
    pub explore: ExploreConfig,
    /// Optim only: hold each replay's commit until this many further forks
    /// have happened. 0 replays synchronously.
    pub replay_delay_forks: u64,
    /// Optim only: back the live store with this file.
    pub store_path: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("mode {0} cannot drive an exploration")]
    UnsupportedMode(Mode),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult<S> {
    pub suite: SuiteReport,
    pub exploration: ExplorationReport<S>,
}

/// Replays assertion-failure tests during exploration so later `__covered`
/// guards see their labels.
struct LiveReplay<'a, S> {
    replayer: &'a Replayer,
    store: &'a mut CoverageStore,
    delay: u64,
    forks: u64,
    queue: VecDeque<(u64, TestCase)>,
    error: Option<ReplayError>,
    _scalar: PhantomData<S>,
}

impl<S: Scalar> LiveReplay<'_, S> {
    fn apply(&mut self, t: &TestCase) {
        if self.error.is_none() {
            if let Err(e) = self.replayer.replay::<S>(t, self.store) {
                self.error = Some(e);
            }
        }
    }

    fn flush(&mut self, all: bool) {
        while let Some((at, _)) = self.queue.front() {
            if !all && at + self.delay > self.forks {
                break;
            }
            let (_, t) = self.queue.pop_front().expect("nonempty");
            self.apply(&t);
        }
    }
}

impl<S: Scalar> ExploreHook for LiveReplay<'_, S> {
    fn on_test(&mut self, t: &TestCase) {
        if !matches!(t.kind, TestKind::AssertErr(_)) {
            return;
        }
        if self.delay == 0 {
            self.apply(t);
        } else {
            self.queue.push_back((self.forks, t.clone()));
        }
    }

    fn is_covered(&self, id: u32) -> bool {
        self.store.is_covered(id)
    }

    fn on_fork(&mut self) {
        self.forks += 1;
        self.flush(false);
    }
}

pub fn run_pipeline<S: Scalar>(
    ap: &AnnotatedProgram,
    h: &Harness,
    mode: Mode,
    cfg: &PipelineConfig,
) -> Result<PipelineResult<S>, PipelineError> {
    if mode == Mode::Replayer {
        return Err(PipelineError::UnsupportedMode(mode));
    }
    let program = transform(ap, mode);
    let replayer = Replayer::new(ap);
    // Complete-path modes keep only tests reaching new code; the assertion
    // modes end every path silently, so the policy would drop nothing useful.
    let explore_cfg = ExploreConfig { covering_new: matches!(mode, Mode::Ignore | Mode::Naive), ..cfg.explore.clone() };
    let exploration = if mode == Mode::Optim {
        let mut live = match &cfg.store_path {
            Some(path) => CoverageStore::open(path, ap.ids()).map_err(ReplayError::from)?,
            None => CoverageStore::in_memory(ap.ids()),
        };
        let mut hook = LiveReplay::<S> {
            replayer: &replayer,
            store: &mut live,
            delay: cfg.replay_delay_forks,
            forks: 0,
            queue: VecDeque::new(),
            error: None,
            _scalar: PhantomData,
        };
        let report = explore::<S>(&program, h, &explore_cfg, Some(&mut hook))?;
        hook.flush(true);
        if let Some(e) = hook.error {
            return Err(e.into());
        }
        report
    } else {
        explore::<S>(&program, h, &explore_cfg, None)?
    };
    let tests = dedup_nondet(&classify_tests(&exploration.tests, mode));
    let mut sigma = CoverageStore::in_memory(ap.ids());
    let suite = greedy_reduce::<S>(&replayer, &tests, &mut sigma)?;
    Ok(PipelineResult { suite, exploration })
}
