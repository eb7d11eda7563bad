//! MiniC: the small C-like language the tool operates on.

pub mod ast;
pub mod interp;
pub mod parser;
pub mod printer;
pub mod typecheck;

pub use ast::*;
pub use interp::{interpret, ExecResult, InterpError, Inputs, LabelHook, Outcome, RteKind, Value, DEFAULT_STEP_LIMIT};
pub use parser::{parse, parse_expr, parse_with_entry, ParseError};
pub use printer::{expr_to_string, program_to_string};
pub use typecheck::{typecheck, Diagnostic};
