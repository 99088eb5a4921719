//! Sound roundoff-error bounds composed with sampling-based accuracy
//! rewriting for straight-line real-arithmetic programs.

pub mod fpcore;
pub mod numeric;
pub mod analysis;
pub mod deadline;
pub mod dynamic;
pub mod rewrite;
pub mod pipeline;
