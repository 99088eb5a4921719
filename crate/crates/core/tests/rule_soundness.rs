use fpv_core::rewrite::{check_rule_soundness, rules_db, SoundnessVerdict};

const TRIALS: usize = 1000;

#[test]
fn every_shipped_rule_passes() {
    let mut failures = Vec::new();
    for (i, rule) in rules_db().iter().enumerate() {
        match check_rule_soundness(rule, TRIALS, 1000 + i as u64) {
            SoundnessVerdict::Passed { trials } if trials == TRIALS => {}
            v => failures.push(format!("{}: {v:?}", rule.name)),
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
