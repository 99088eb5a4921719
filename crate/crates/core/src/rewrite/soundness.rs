//! Oracle check that both sides of a rule denote the same real function.

use std::collections::BTreeMap;

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rules::RewriteRule;
use crate::numeric::{eval_real, f64_to_rational, pow2, Interval, Rational, RealError};

/// Relative agreement demanded between the two sides.
const AGREE_BITS: u32 = 80;
/// Guard-rejected draws allowed per requested trial.
const DRAWS_PER_TRIAL: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SoundnessVerdict {
    /// Every trial agreed; `trials` counts conclusive comparisons.
    Passed { trials: usize },
    Counterexample { bindings: Vec<(String, Rational)>, lhs: Interval, rhs: Interval },
    /// One side is undefined at a point where the guard holds.
    DomainViolation { bindings: Vec<(String, Rational)>, side: &'static str },
}

impl SoundnessVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, SoundnessVerdict::Passed { .. })
    }
}

/// Random sign, magnitude log-uniform over 2^-8 .. 2^8, rounded to binary64.
fn draw(rng: &mut ChaCha8Rng) -> Rational {
    let mag = (rng.gen_range(-8.0..8.0f64)).exp2();
    let v = if rng.gen_bool(0.5) { -mag } else { mag };
    f64_to_rational(v).expect("finite")
}

fn midpoint(i: &Interval) -> Rational {
    (i.lo() + i.hi()) / Rational::from_integer(2.into())
}

pub fn check_rule_soundness(rule: &RewriteRule, trials: usize, seed: u64) -> SoundnessVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let metas = rule.lhs.metavars();
    let (lhs, rhs) = (rule.lhs.to_expr(), rule.rhs.to_expr());
    let guards: Vec<_> = rule.guards.iter().map(|g| (g.kind, g.expr.to_expr())).collect();
    let tol = pow2(-(AGREE_BITS as i64 - 2));
    let one = Rational::from_integer(1.into());
    let mut done = 0;
    for _ in 0..trials * DRAWS_PER_TRIAL {
        if done >= trials {
            break;
        }
        let point: BTreeMap<String, Rational> = metas.iter().map(|m| (m.clone(), draw(&mut rng))).collect();
        let admitted = guards.iter().all(|(kind, g)| match eval_real(g, &point, AGREE_BITS) {
            Ok(v) if v.conclusive => kind.admits(&v.enclosure),
            _ => false,
        });
        if !admitted {
            continue;
        }
        let bindings = || point.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let l = eval_real(&lhs, &point, AGREE_BITS);
        let r = eval_real(&rhs, &point, AGREE_BITS);
        let (l, r) = match (l, r) {
            (Err(RealError::Domain { .. }), _) => return SoundnessVerdict::DomainViolation { bindings: bindings(), side: "lhs" },
            (_, Err(RealError::Domain { .. })) => return SoundnessVerdict::DomainViolation { bindings: bindings(), side: "rhs" },
            (Ok(l), Ok(r)) if l.conclusive && r.conclusive => (l.enclosure, r.enclosure),
            _ => continue,
        };
        let (ml, mr) = (midpoint(&l), midpoint(&r));
        let scale = if ml.abs() > one { ml.abs() } else { one.clone() };
        if (&ml - &mr).abs() > &tol * scale {
            return SoundnessVerdict::Counterexample { bindings: bindings(), lhs: l, rhs: r };
        }
        done += 1;
    }
    SoundnessVerdict::Passed { trials: done }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::rules::rules_db;
    use crate::rewrite::Pattern;

    fn rule(name: &str) -> RewriteRule {
        rules_db().into_iter().find(|r| r.name == name).unwrap()
    }

    #[test]
    fn broken_rule_is_caught() {
        let mut r = rule("add-comm");
        r.rhs = Pattern::parse("(- ?a ?b)").unwrap();
        assert!(matches!(check_rule_soundness(&r, 100, 1), SoundnessVerdict::Counterexample { .. }));
    }

    #[test]
    fn guard_prevents_domain_violations() {
        let r = rule("sqrt-conjugate");
        assert!(check_rule_soundness(&r, 200, 2).passed());
        match check_rule_soundness(&r.without_guards(), 200, 2) {
            SoundnessVerdict::DomainViolation { bindings, .. } => {
                assert!(bindings.iter().any(|(_, v)| v < &Rational::from_integer(0.into())));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sample_of_shipped_rules() {
        for name in ["exp-sum", "log-div", "horner", "recip-diff", "div-div", "diff-squares"] {
            let v = check_rule_soundness(&rule(name), 100, 3);
            assert!(matches!(v, SoundnessVerdict::Passed { trials: 100 }), "{name}: {v:?}");
        }
    }
}
