pub mod coverage;
pub mod bench;
pub mod cli;
pub mod criteria;
pub mod instrument;
pub mod minic;
pub mod scalar;
pub mod symex;

pub use scalar::{Exact, Scalar};

/// Default integer carrier.
pub type Int = i128;
pub type Value = minic::Value<Int>;
pub type ExecResult = minic::ExecResult<Int>;
pub type ExactValue = minic::Value<Exact>;
