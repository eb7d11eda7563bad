//! Label coverage measurement: the store, the replayer and suite reduction.

pub mod pipeline;
pub mod replay;
pub mod store;
pub mod suite;

pub use pipeline::{run_pipeline, PipelineConfig, PipelineError, PipelineResult};
pub use replay::{replay, ReplayBuffer, ReplayError, ReplayResult, Replayer};
pub use store::CoverageStore;
pub use suite::{dedup_nondet, greedy_reduce, SuiteReport};
