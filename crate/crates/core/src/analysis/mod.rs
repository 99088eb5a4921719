//! Sound worst-case absolute roundoff analysis for binary64 evaluation.
//!
//! Every node carries a real range `R`, an enclosure `F` of the binary64
//! value, and an error bound `e` with `|float - real| <= e`. Domain checks
//! run on `hull(R, F)` so that both semantics stay defined.

mod ia;
mod portfolio;
mod smt;
mod subdiv;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fpcore::{ExprPath, FpCoreProgram};
use crate::numeric::{pow2, ExactRational, Interval, Rational};

pub(crate) use ia::int_exponent;
pub use ia::{analyze_ia, analyze_ia_with, float_range};
pub use portfolio::{analyze_modes, analyze_portfolio, analyze_portfolio_with, combine_portfolio};
pub use smt::{emit_smt_query, refine_range_with_solver, SmtError, Side};
pub use subdiv::{analyze_subdiv, analyze_subdiv_with, split_counts, split_range};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlarmKind {
    #[serde(rename = "DIV0")]
    Div0,
    #[serde(rename = "SQRTNEG")]
    SqrtNeg,
    #[serde(rename = "LOGDOMAIN")]
    LogDomain,
    #[serde(rename = "NONINT_POW")]
    NonIntPow,
    #[serde(rename = "COND_UNSUPPORTED")]
    CondUnsupported,
    #[serde(rename = "CBRT_SINGULAR")]
    CbrtSingular,
    #[serde(rename = "FN_UNSUPPORTED")]
    FnUnsupported,
    #[serde(rename = "OVERFLOW")]
    Overflow,
}

impl AlarmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlarmKind::Div0 => "DIV0",
            AlarmKind::SqrtNeg => "SQRTNEG",
            AlarmKind::LogDomain => "LOGDOMAIN",
            AlarmKind::NonIntPow => "NONINT_POW",
            AlarmKind::CondUnsupported => "COND_UNSUPPORTED",
            AlarmKind::CbrtSingular => "CBRT_SINGULAR",
            AlarmKind::FnUnsupported => "FN_UNSUPPORTED",
            AlarmKind::Overflow => "OVERFLOW",
        }
    }

    /// Short code used in table cells.
    pub fn cell_code(self) -> &'static str {
        match self {
            AlarmKind::Div0 => "DIV0",
            AlarmKind::SqrtNeg => "SQRTNEG",
            AlarmKind::LogDomain => "LOG",
            AlarmKind::NonIntPow => "POW",
            AlarmKind::CondUnsupported => "COND",
            AlarmKind::CbrtSingular => "CBRT",
            AlarmKind::FnUnsupported => "FN",
            AlarmKind::Overflow => "OVF",
        }
    }
}

impl fmt::Display for AlarmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ErrorBound {
    pub abs_err: Rational,
}

impl Serialize for ErrorBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ExactRational(self.abs_err.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ErrorBound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(ErrorBound { abs_err: ExactRational::deserialize(d)?.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisOutcome {
    Bound { error: ErrorBound, range: Interval },
    Alarm { kind: AlarmKind, path: ExprPath },
    Timeout,
}

impl AnalysisOutcome {
    pub fn bound(&self) -> Option<&Rational> {
        match self {
            AnalysisOutcome::Bound { error, .. } => Some(&error.abs_err),
            _ => None,
        }
    }

    pub fn alarm(&self) -> Option<AlarmKind> {
        match self {
            AnalysisOutcome::Alarm { kind, .. } => Some(*kind),
            _ => None,
        }
    }

    pub fn is_timeout(&self) -> bool {
        matches!(self, AnalysisOutcome::Timeout)
    }
}

/// Analysis modes combined by the portfolio; the order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ia,
    Subdiv,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Ia, Mode::Subdiv];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ia => "ia",
            Mode::Subdiv => "subdiv",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        match s {
            "ia" => Some(Mode::Ia),
            "subdiv" => Some(Mode::Subdiv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisParams {
    /// Relative rounding error of one correctly rounded operation.
    pub unit_roundoff: Rational,
    /// Absolute error floor covering subnormal results.
    pub denormal_term: Rational,
    /// Multiplier on `unit_roundoff` for library calls.
    pub lib_factor: Rational,
    pub precision_bits: u32,
    pub inputs_rounded: bool,
    pub subdiv_per_var: u32,
    pub max_boxes: u64,
    pub time_budget_ms: Option<u64>,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            unit_roundoff: pow2(-53),
            denormal_term: pow2(-1075),
            lib_factor: Rational::from_integer(2.into()),
            precision_bits: 128,
            inputs_rounded: true,
            subdiv_per_var: 8,
            max_boxes: 4096,
            time_budget_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("program '{0}' has no precondition")]
    MissingPrecondition(String),
    #[error("precondition of '{program}' has no range for argument {var}")]
    MissingRange { program: String, var: String },
    #[error("invalid analysis parameters: {0}")]
    InvalidParams(&'static str),
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let zero = Rational::from_integer(0.into());
        if self.unit_roundoff <= zero || self.denormal_term <= zero {
            return Err(AnalysisError::InvalidParams("unit roundoff and denormal term must be positive"));
        }
        if self.lib_factor < Rational::from_integer(1.into()) {
            return Err(AnalysisError::InvalidParams("library factor must be at least 1"));
        }
        if self.subdiv_per_var < 1 || self.max_boxes < 1 {
            return Err(AnalysisError::InvalidParams("subdivisions and box budget must be at least 1"));
        }
        if self.precision_bits < 64 {
            return Err(AnalysisError::InvalidParams("precision must be at least 64 bits"));
        }
        Ok(())
    }
}

/// Input ranges in argument order.
pub(crate) fn argument_ranges(program: &FpCoreProgram) -> Result<Vec<Interval>, AnalysisError> {
    let pre = program
        .precondition
        .as_ref()
        .ok_or_else(|| AnalysisError::MissingPrecondition(program.name.clone()))?;
    program
        .args
        .iter()
        .map(|a| {
            pre.get(a)
                .cloned()
                .ok_or_else(|| AnalysisError::MissingRange { program: program.name.clone(), var: a.clone() })
        })
        .collect()
}
