//! `key = value` run configuration. Keys mirror the CLI flags; `-` and `_`
//! are interchangeable.

use std::path::PathBuf;
use std::str::FromStr;

use super::{ReportFormat, RunConfig, Strategy};
use crate::numeric::format::parse_number;
use crate::numeric::Interval;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for '{key}': {value}")]
    BadValue { line: usize, key: String, value: String },
}

fn num<T: FromStr>(v: &str) -> Option<T> {
    v.parse().ok()
}

fn strategies(v: &str) -> Option<Vec<Strategy>> {
    v.split(',').map(|s| Strategy::from_name(s.trim())).collect()
}

/// Applies one setting; `None` when the value does not parse.
fn apply(config: &mut RunConfig, key: &str, v: &str) -> Result<Option<()>, ()> {
    let a = &mut config.analysis;
    let s = &mut config.search;
    let ok = match key {
        "seed" => num(v).map(|x| config.seed = x),
        "timeout" | "timeout_ms" => num(v).map(|x| config.timeout_ms = x),
        "samples" => num(v).map(|x| config.samples = x),
        "workers" => num(v).map(|x| config.workers = x),
        "format" => ReportFormat::from_name(v).map(|f| config.format = f),
        "strategy" | "strategies" => strategies(v).map(|l| config.strategies = l.into_iter().collect()),
        "smt_solver" => {
            config.smt_solver = Some(PathBuf::from(v));
            Some(())
        }
        "smt_probes" => num(v).map(|x| config.smt_probes = x),
        "preconditions" => {
            config.preconditions = Some(PathBuf::from(v));
            Some(())
        }
        "fallback" => {
            let mut it = v.split_whitespace().map(parse_number);
            match (it.next().flatten(), it.next().flatten(), it.next()) {
                (Some(lo), Some(hi), None) => Interval::new(lo, hi).ok().map(|i| config.fallback = i),
                _ => None,
            }
        }
        "subdiv" => num(v).map(|x| a.subdiv_per_var = x),
        "max_boxes" => num(v).map(|x| a.max_boxes = x),
        "precision_bits" => num(v).map(|x| a.precision_bits = x),
        "inputs_rounded" => num(v).map(|x| a.inputs_rounded = x),
        "max_iters" => num(v).map(|x| s.greedy.max_iters = x),
        "neighbor_cap" => num(v).map(|x| s.greedy.neighbor_cap = x),
        "min_gain_bits" => num(v).map(|x| s.greedy.min_gain_bits = x),
        "population" => num(v).map(|x| s.genetic.population = x),
        "generations" => num(v).map(|x| s.genetic.generations = x),
        "tournament" => num(v).map(|x| s.genetic.tournament = x),
        "elite" => num(v).map(|x| s.genetic.elite = x),
        "mutation_attempts" => num(v).map(|x| s.genetic.mutation_attempts_per_child = x),
        _ => return Err(()),
    };
    Ok(ok)
}

/// Applies every `key = value` line of `text` to `config`. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_config(text: &str, config: &mut RunConfig) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let key = k.trim().replace('-', "_");
        let value = v.trim();
        match apply(config, &key, value) {
            Err(()) => return Err(ConfigError::UnknownKey { line, key }),
            Ok(None) => return Err(ConfigError::BadValue { line, key, value: value.to_string() }),
            Ok(Some(())) => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_and_values() {
        let mut c = RunConfig::default();
        parse_config("# run\nseed = 7\nsmt-solver = /usr/bin/z3\n\nstrategy = greedy, both\nsubdiv=4\nfallback = -1 1e3\n", &mut c)
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.smt_solver, Some(PathBuf::from("/usr/bin/z3")));
        assert_eq!(c.strategies, [Strategy::Greedy, Strategy::Both].into_iter().collect());
        assert_eq!(c.analysis.subdiv_per_var, 4);
        assert_eq!(c.fallback, Interval::from_ints(-1, 1000).unwrap());
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = RunConfig::default();
        assert_eq!(parse_config("seed 7", &mut c), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(parse_config("\ncolour = red", &mut c), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(parse_config("workers = many", &mut c), Err(ConfigError::BadValue { line: 1, .. })));
    }
}
