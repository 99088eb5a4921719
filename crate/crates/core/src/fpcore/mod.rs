//! FPCore front end: expressions, parsing, printing and translation.

mod expr;
mod parse;
pub mod precondition;
pub mod scala;
pub mod sexpr;

pub use expr::{BinaryOp, CmpOp, Comparison, Expr, ExprPath, UnaryOp};
pub use parse::{emit_fpcore, parse_expr, parse_fpcore, precondition_sexp, FpCoreProgram, ParseError, Precondition};
pub use precondition::{default_precondition, PreconditionError, Sidecar};
pub use scala::{emit_scala_dsl, emit_scala_object, ScalaError};
