//! Rewrite rules and two accuracy-improvement searches: greedy over sampled
//! bits of error with unguarded rules, and genetic over the static bound with
//! guarded rules.

mod pattern;
mod rules;
mod search;
mod soundness;

pub use pattern::{Bindings, Pattern, PatternError};
pub use rules::{guards_hold, neighbors, rules_db, rules_text, simplify, simplify_rules, Guard, GuardKind, GuardMode, RewriteRule};
pub use search::{
    genetic_improve, genetic_search, greedy_improve, greedy_search, Candidate, GeneticOutcome, GeneticParams, GreedyOutcome,
    GreedyParams, RewriteError, Score, SearchParams, INVALID_BITS,
};
pub use soundness::{check_rule_soundness, SoundnessVerdict};
