//! Tightest sound bound over several analysis modes.

use std::collections::BTreeMap;

use super::{analyze_ia_with, analyze_subdiv_with, AnalysisError, AnalysisOutcome, AnalysisParams, Mode};
use crate::deadline::Deadline;
use crate::fpcore::FpCoreProgram;

/// Runs every requested mode in tie-break order.
pub fn analyze_modes(
    program: &FpCoreProgram,
    params: &AnalysisParams,
    modes: &[Mode],
    deadline: &Deadline,
) -> Result<BTreeMap<Mode, AnalysisOutcome>, AnalysisError> {
    let mut out = BTreeMap::new();
    let mut modes = modes.to_vec();
    modes.sort();
    modes.dedup();
    for m in modes {
        let r = match m {
            Mode::Ia => analyze_ia_with(program, params, deadline)?,
            Mode::Subdiv => analyze_subdiv_with(program, params, deadline)?,
        };
        out.insert(m, r);
    }
    Ok(out)
}

/// Minimum bound over the members (earliest mode on ties); else the first
/// alarm; else `Timeout`.
pub fn combine_portfolio(members: &BTreeMap<Mode, AnalysisOutcome>) -> AnalysisOutcome {
    let mut best: Option<&AnalysisOutcome> = None;
    for o in members.values() {
        if let Some(b) = o.bound() {
            if best.and_then(AnalysisOutcome::bound).is_none_or(|cur| b < cur) {
                best = Some(o);
            }
        }
    }
    if let Some(b) = best {
        return b.clone();
    }
    members
        .values()
        .find(|o| o.alarm().is_some())
        .cloned()
        .unwrap_or(AnalysisOutcome::Timeout)
}

pub fn analyze_portfolio(
    program: &FpCoreProgram,
    params: &AnalysisParams,
    modes: &[Mode],
) -> Result<AnalysisOutcome, AnalysisError> {
    analyze_portfolio_with(program, params, modes, &Deadline::from_budget(params.time_budget_ms))
}

pub fn analyze_portfolio_with(
    program: &FpCoreProgram,
    params: &AnalysisParams,
    modes: &[Mode],
    deadline: &Deadline,
) -> Result<AnalysisOutcome, AnalysisError> {
    Ok(combine_portfolio(&analyze_modes(program, params, modes, deadline)?))
}
