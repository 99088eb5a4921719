//! Default input ranges for programs that carry no usable precondition.

use std::collections::BTreeMap;

use super::parse::{FpCoreProgram, Precondition};
use crate::numeric::{format::parse_number, Interval, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreconditionError {
    #[error("sidecar line {line}: {msg}")]
    Sidecar { line: usize, msg: String },
    #[error("sidecar ranges for '{benchmark}' do not cover exactly its arguments")]
    PartialSidecar { benchmark: String },
    #[error("fallback endpoint {0} is not in the permitted set")]
    FallbackEndpoint(String),
}

/// Range file entries: benchmark name to per-variable ranges in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sidecar {
    entries: BTreeMap<String, Vec<(String, Interval)>>,
}

impl Sidecar {
    /// Parses lines of `benchmark-name variable lo hi`. The name may contain
    /// spaces; the last three fields are the variable and bounds. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Sidecar, PreconditionError> {
        let mut entries: BTreeMap<String, Vec<(String, Interval)>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| PreconditionError::Sidecar { line: i + 1, msg: msg.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 4 {
                return Err(err("expected: benchmark-name variable lo hi"));
            }
            let n = fields.len();
            let name = fields[..n - 3].join(" ");
            let var = fields[n - 3].to_string();
            let lo = parse_number(fields[n - 2]).ok_or_else(|| err("bad lower bound"))?;
            let hi = parse_number(fields[n - 1]).ok_or_else(|| err("bad upper bound"))?;
            let iv = Interval::new(lo, hi).map_err(|_| err("lower bound exceeds upper bound"))?;
            let list = entries.entry(name).or_default();
            if list.iter().any(|(v, _)| *v == var) {
                return Err(err("variable listed twice for this benchmark"));
            }
            list.push((var, iv));
        }
        Ok(Sidecar { entries })
    }

    pub fn get(&self, benchmark: &str) -> Option<&[(String, Interval)]> {
        self.entries.get(benchmark).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Endpoints a fallback range may use.
pub fn permitted_endpoints() -> Vec<Rational> {
    ["-1e20", "-1e10", "-1", "-1e-10", "-1e-20", "1e-20", "1e-10", "1", "1e10", "1e20"]
        .iter()
        .map(|s| parse_number(s).expect("literal"))
        .collect()
}

/// The default fallback range `[1, 1e10]`.
pub fn default_fallback() -> Interval {
    Interval::new(parse_number("1").expect("literal"), parse_number("1e10").expect("literal")).expect("ordered")
}

/// Checks that both endpoints of a fallback range come from the permitted set.
pub fn validate_fallback(fallback: &Interval) -> Result<(), PreconditionError> {
    let allowed = permitted_endpoints();
    for e in [fallback.lo(), fallback.hi()] {
        if !allowed.contains(e) {
            return Err(PreconditionError::FallbackEndpoint(crate::numeric::format::fpcore_number(e)));
        }
    }
    Ok(())
}

/// Existing precondition if present; else the sidecar entry for the
/// benchmark (which must cover every argument); else `fallback` for every
/// argument.
pub fn default_precondition(
    program: &FpCoreProgram,
    sidecar: Option<&Sidecar>,
    fallback: &Interval,
) -> Result<Precondition, PreconditionError> {
    if let Some(p) = &program.precondition {
        return Ok(p.clone());
    }
    if let Some(entry) = sidecar.and_then(|s| s.get(&program.name)) {
        let pre = Precondition::new(entry.to_vec());
        if !pre.covers_exactly(&program.args) {
            return Err(PreconditionError::PartialSidecar { benchmark: program.name.clone() });
        }
        return Ok(pre.in_order(&program.args).expect("covers every argument"));
    }
    validate_fallback(fallback)?;
    Ok(Precondition::new(program.args.iter().map(|a| (a.clone(), fallback.clone())).collect()))
}
