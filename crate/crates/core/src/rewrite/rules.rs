//! The rule database, guard checking, and single-step rewriting.

use std::collections::HashSet;
use std::fmt;

use super::pattern::{Bindings, Pattern};
use crate::analysis::{float_range, AnalysisParams};
use crate::fpcore::{Expr, ExprPath, Precondition};
use crate::numeric::{Interval, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuardKind {
    NonZero,
    NonNeg,
    Positive,
}

impl GuardKind {
    pub fn name(self) -> &'static str {
        match self {
            GuardKind::NonZero => "nonzero",
            GuardKind::NonNeg => "nonneg",
            GuardKind::Positive => "positive",
        }
    }

    pub fn admits(self, r: &Interval) -> bool {
        let zero = Rational::from_integer(0.into());
        match self {
            GuardKind::NonZero => !(r.lo() <= &zero && &zero <= r.hi()),
            GuardKind::NonNeg => r.lo() >= &zero,
            GuardKind::Positive => r.lo() > &zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Guard {
    pub kind: GuardKind,
    pub expr: Pattern,
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.name(), self.expr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RewriteRule {
    pub name: String,
    pub lhs: Pattern,
    pub rhs: Pattern,
    /// All must hold; empty means unconditional.
    pub guards: Vec<Guard>,
}

impl RewriteRule {
    /// Panics on malformed text; only used for the built-in table.
    fn build(name: &str, lhs: &str, rhs: &str, guards: &str) -> RewriteRule {
        let lhs = Pattern::parse(lhs).expect("valid rule lhs");
        let rhs = Pattern::parse(rhs).expect("valid rule rhs");
        let guards = guards
            .split(',')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(|g| {
                let (k, e) = g.split_once(' ').expect("guard kind and pattern");
                let kind = match k {
                    "nonzero" => GuardKind::NonZero,
                    "nonneg" => GuardKind::NonNeg,
                    "positive" => GuardKind::Positive,
                    _ => panic!("unknown guard {k}"),
                };
                Guard { kind, expr: Pattern::parse(e).expect("valid guard pattern") }
            })
            .collect();
        let rule = RewriteRule { name: name.to_string(), lhs, rhs, guards };
        let lm = rule.lhs.metavars();
        assert!(rule.rhs.metavars().iter().all(|m| lm.contains(m)), "rule {name} invents metavariables");
        rule
    }

    pub fn without_guards(&self) -> RewriteRule {
        RewriteRule { guards: Vec::new(), ..self.clone() }
    }

    /// Rewrites `e` at its root if the pattern matches.
    pub fn apply(&self, e: &Expr) -> Option<(Expr, Bindings)> {
        let b = self.lhs.match_expr(e)?;
        Some((self.rhs.instantiate(&b), b))
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} => {}", self.name, self.lhs, self.rhs)?;
        if !self.guards.is_empty() {
            let g: Vec<String> = self.guards.iter().map(Guard::to_string).collect();
            write!(f, " [{}]", g.join(", "))?;
        }
        Ok(())
    }
}

const SQRT_GUARD: &str = "nonneg ?a, nonneg ?b, nonzero (+ (sqrt ?a) (sqrt ?b))";

const RULES: &[(&str, &str, &str, &str)] = &[
    ("add-comm", "(+ ?a ?b)", "(+ ?b ?a)", ""),
    ("mul-comm", "(* ?a ?b)", "(* ?b ?a)", ""),
    ("add-assoc-l", "(+ ?a (+ ?b ?c))", "(+ (+ ?a ?b) ?c)", ""),
    ("add-assoc-r", "(+ (+ ?a ?b) ?c)", "(+ ?a (+ ?b ?c))", ""),
    ("mul-assoc-l", "(* ?a (* ?b ?c))", "(* (* ?a ?b) ?c)", ""),
    ("mul-assoc-r", "(* (* ?a ?b) ?c)", "(* ?a (* ?b ?c))", ""),
    ("distribute-l", "(* ?a (+ ?b ?c))", "(+ (* ?a ?b) (* ?a ?c))", ""),
    ("factor-l", "(+ (* ?a ?b) (* ?a ?c))", "(* ?a (+ ?b ?c))", ""),
    ("distribute-r", "(* (+ ?a ?b) ?c)", "(+ (* ?a ?c) (* ?b ?c))", ""),
    ("factor-r", "(+ (* ?a ?c) (* ?b ?c))", "(* (+ ?a ?b) ?c)", ""),
    ("distribute-sub-l", "(* ?a (- ?b ?c))", "(- (* ?a ?b) (* ?a ?c))", ""),
    ("factor-sub-l", "(- (* ?a ?b) (* ?a ?c))", "(* ?a (- ?b ?c))", ""),
    ("distribute-sub-r", "(* (- ?a ?b) ?c)", "(- (* ?a ?c) (* ?b ?c))", ""),
    ("factor-sub-r", "(- (* ?a ?c) (* ?b ?c))", "(* (- ?a ?b) ?c)", ""),
    ("sub-flip", "(- ?a ?b)", "(- (- ?b ?a))", ""),
    ("sub-flip-rev", "(- (- ?b ?a))", "(- ?a ?b)", ""),
    ("diff-squares", "(- (* ?a ?a) (* ?b ?b))", "(* (- ?a ?b) (+ ?a ?b))", ""),
    ("diff-squares-rev", "(* (- ?a ?b) (+ ?a ?b))", "(- (* ?a ?a) (* ?b ?b))", ""),
    ("diff-squares-pow", "(- (pow ?a 2) (pow ?b 2))", "(* (- ?a ?b) (+ ?a ?b))", ""),
    ("diff-square-one", "(- (* ?a ?a) 1)", "(* (- ?a 1) (+ ?a 1))", ""),
    ("diff-square-one-pow", "(- (pow ?a 2) 1)", "(* (- ?a 1) (+ ?a 1))", ""),
    ("diff-square-one-rev", "(* (- ?a 1) (+ ?a 1))", "(- (* ?a ?a) 1)", ""),
    ("sqrt-conjugate", "(- (sqrt ?a) (sqrt ?b))", "(/ (- ?a ?b) (+ (sqrt ?a) (sqrt ?b)))", SQRT_GUARD),
    ("sqrt-conjugate-rev", "(/ (- ?a ?b) (+ (sqrt ?a) (sqrt ?b)))", "(- (sqrt ?a) (sqrt ?b))", SQRT_GUARD),
    ("recip-diff", "(- (/ 1 ?a) (/ 1 ?b))", "(/ (- ?b ?a) (* ?a ?b))", "nonzero ?a, nonzero ?b"),
    ("recip-diff-rev", "(/ (- ?b ?a) (* ?a ?b))", "(- (/ 1 ?a) (/ 1 ?b))", "nonzero ?a, nonzero ?b"),
    ("frac-split", "(/ (+ ?a ?b) ?c)", "(+ (/ ?a ?c) (/ ?b ?c))", "nonzero ?c"),
    ("frac-join", "(+ (/ ?a ?c) (/ ?b ?c))", "(/ (+ ?a ?b) ?c)", "nonzero ?c"),
    ("frac-split-sub", "(/ (- ?a ?b) ?c)", "(- (/ ?a ?c) (/ ?b ?c))", "nonzero ?c"),
    ("frac-join-sub", "(- (/ ?a ?c) (/ ?b ?c))", "(/ (- ?a ?b) ?c)", "nonzero ?c"),
    ("log-mul", "(log (* ?a ?b))", "(+ (log ?a) (log ?b))", "positive ?a, positive ?b"),
    ("log-mul-rev", "(+ (log ?a) (log ?b))", "(log (* ?a ?b))", "positive ?a, positive ?b"),
    ("log-div", "(log (/ ?a ?b))", "(- (log ?a) (log ?b))", "positive ?a, positive ?b"),
    ("log-div-rev", "(- (log ?a) (log ?b))", "(log (/ ?a ?b))", "positive ?a, positive ?b"),
    ("exp-sum", "(exp (+ ?a ?b))", "(* (exp ?a) (exp ?b))", ""),
    ("exp-sum-rev", "(* (exp ?a) (exp ?b))", "(exp (+ ?a ?b))", ""),
    ("exp-diff", "(exp (- ?a ?b))", "(/ (exp ?a) (exp ?b))", ""),
    ("exp-diff-rev", "(/ (exp ?a) (exp ?b))", "(exp (- ?a ?b))", ""),
    ("exp-log", "(exp (log ?x))", "?x", "positive ?x"),
    ("log-exp", "(log (exp ?x))", "?x", ""),
    ("horner", "(+ (* (* ?a ?x) ?x) (* ?b ?x))", "(* (+ (* ?a ?x) ?b) ?x)", ""),
    ("horner-rev", "(* (+ (* ?a ?x) ?b) ?x)", "(+ (* (* ?a ?x) ?x) (* ?b ?x))", ""),
    ("square-pow", "(pow ?a 2)", "(* ?a ?a)", ""),
    ("square-pow-rev", "(* ?a ?a)", "(pow ?a 2)", ""),
    ("mul-one", "(* ?x 1)", "?x", ""),
    ("one-mul", "(* 1 ?x)", "?x", ""),
    ("add-zero", "(+ ?x 0)", "?x", ""),
    ("zero-add", "(+ 0 ?x)", "?x", ""),
    ("sub-zero", "(- ?x 0)", "?x", ""),
    ("div-one", "(/ ?x 1)", "?x", ""),
    ("div-self", "(/ ?x ?x)", "1", "nonzero ?x"),
    ("add-sub-cancel", "(- (+ ?a ?b) ?a)", "?b", ""),
    ("add-sub-cancel-r", "(- (+ ?b ?a) ?a)", "?b", ""),
    ("sub-add-cancel", "(+ (- ?a ?b) ?b)", "?a", ""),
    ("neg-neg", "(- (- ?x))", "?x", ""),
    ("sub-to-neg", "(- ?a ?b)", "(+ ?a (- ?b))", ""),
    ("neg-to-sub", "(+ ?a (- ?b))", "(- ?a ?b)", ""),
    ("sub-sub", "(- ?a (- ?b ?c))", "(+ (- ?a ?b) ?c)", ""),
    ("sub-sub-rev", "(+ (- ?a ?b) ?c)", "(- ?a (- ?b ?c))", ""),
    ("add-sub-assoc", "(- (+ ?a ?b) ?c)", "(+ ?a (- ?b ?c))", ""),
    ("add-sub-assoc-rev", "(+ ?a (- ?b ?c))", "(- (+ ?a ?b) ?c)", ""),
    ("sub-sub-assoc", "(- (- ?a ?b) ?c)", "(- ?a (+ ?b ?c))", ""),
    ("sub-sub-assoc-rev", "(- ?a (+ ?b ?c))", "(- (- ?a ?b) ?c)", ""),
    ("neg-mul", "(* (- ?a) ?b)", "(- (* ?a ?b))", ""),
    ("neg-mul-rev", "(- (* ?a ?b))", "(* (- ?a) ?b)", ""),
    ("neg-div", "(/ (- ?a) ?b)", "(- (/ ?a ?b))", ""),
    ("neg-div-rev", "(- (/ ?a ?b))", "(/ (- ?a) ?b)", ""),
    ("div-div", "(/ (/ ?a ?b) ?c)", "(/ ?a (* ?b ?c))", ""),
    ("div-div-rev", "(/ ?a (* ?b ?c))", "(/ (/ ?a ?b) ?c)", ""),
    ("mul-div", "(* ?a (/ ?b ?c))", "(/ (* ?a ?b) ?c)", ""),
    ("mul-div-rev", "(/ (* ?a ?b) ?c)", "(* ?a (/ ?b ?c))", ""),
];

/// Size-reducing rules applied to a fixpoint after each search step.
const SIMPLIFY: &[&str] = &[
    "mul-one",
    "one-mul",
    "add-zero",
    "zero-add",
    "sub-zero",
    "div-one",
    "add-sub-cancel",
    "add-sub-cancel-r",
    "sub-add-cancel",
    "neg-neg",
    "log-exp",
];

/// The fixed, ordered rule set.
pub fn rules_db() -> Vec<RewriteRule> {
    RULES.iter().map(|(n, l, r, g)| RewriteRule::build(n, l, r, g)).collect()
}

pub fn simplify_rules() -> Vec<RewriteRule> {
    rules_db().into_iter().filter(|r| SIMPLIFY.contains(&r.name.as_str())).collect()
}

/// One rule per line.
pub fn rules_text(rules: &[RewriteRule]) -> String {
    rules.iter().map(|r| format!("{r}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuardMode {
    Guarded,
    Unguarded,
}

/// Let-bindings in scope at `path`, outermost first.
fn scopes_along(root: &Expr, path: &[usize]) -> Vec<Vec<(String, Expr)>> {
    let mut out = Vec::new();
    let mut cur = root;
    for &i in path {
        if let Expr::Let(bs, _) = cur {
            if i == bs.len() {
                out.push(bs.clone());
            }
        }
        match cur.children().into_iter().nth(i) {
            Some(c) => cur = c,
            None => break,
        }
    }
    out
}

/// Checks every guard by interval analysis of the instantiated guard
/// expression, closed over the enclosing let-bindings.
pub fn guards_hold(rule: &RewriteRule, b: &Bindings, root: &Expr, path: &[usize], pre: &Precondition) -> bool {
    if rule.guards.is_empty() {
        return true;
    }
    let scopes = scopes_along(root, path);
    let vars: Vec<String> = pre.ranges().iter().map(|(v, _)| v.clone()).collect();
    let ranges: Vec<Interval> = pre.ranges().iter().map(|(_, r)| r.clone()).collect();
    let params = AnalysisParams::default();
    rule.guards.iter().all(|g| {
        let e = scopes
            .iter()
            .rev()
            .fold(g.expr.instantiate(b), |acc, bs| Expr::Let(bs.clone(), Box::new(acc)));
        float_range(&e, &vars, &ranges, &params).is_some_and(|r| g.kind.admits(&r))
    })
}

/// Single-rule, single-position rewrites in position-major, rule-minor
/// order, deduplicated and truncated at `cap`.
pub fn neighbors(expr: &Expr, rules: &[RewriteRule], mode: GuardMode, pre: &Precondition, cap: usize) -> Vec<Expr> {
    let mut seen: HashSet<Expr> = HashSet::new();
    seen.insert(expr.clone());
    let mut out = Vec::new();
    for ExprPath(path) in expr.paths() {
        let sub = expr.at(&ExprPath(path.clone())).expect("valid path");
        for rule in rules {
            if out.len() >= cap {
                return out;
            }
            let Some((new, b)) = rule.apply(sub) else { continue };
            if mode == GuardMode::Guarded && !guards_hold(rule, &b, expr, &path, pre) {
                continue;
            }
            let cand = expr.replaced_at(&path, new);
            if seen.insert(cand.clone()) {
                out.push(cand);
            }
        }
    }
    out
}

/// Rules whose left side matches at `path`, in rule order.
pub(crate) fn matching_rules<'r>(expr: &Expr, path: &[usize], rules: &'r [RewriteRule]) -> Vec<(&'r RewriteRule, Expr, Bindings)> {
    let Some(sub) = expr.at(&ExprPath(path.to_vec())) else { return Vec::new() };
    rules.iter().filter_map(|r| r.apply(sub).map(|(n, b)| (r, n, b))).collect()
}

/// Applies unconditional size-reducing rules bottom-up until nothing changes.
pub fn simplify(expr: &Expr) -> Expr {
    fn go(e: &Expr, rules: &[RewriteRule]) -> Expr {
        let mut cur = e.clone();
        for c in cur.children_mut() {
            *c = go(c, rules);
        }
        loop {
            match rules.iter().find_map(|r| r.apply(&cur)) {
                Some((next, _)) => cur = go(&next, rules),
                None => return cur,
            }
        }
    }
    go(expr, &simplify_rules())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpcore::parse_expr;

    fn pre(vars: &[(&str, i64, i64)]) -> Precondition {
        Precondition::new(vars.iter().map(|(v, a, b)| (v.to_string(), Interval::from_ints(*a, *b).unwrap())).collect())
    }

    fn rule(name: &str) -> RewriteRule {
        rules_db().into_iter().find(|r| r.name == name).unwrap()
    }

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn names_are_unique() {
        let rules = rules_db();
        let names: HashSet<&str> = rules.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names.len(), rules.len());
        assert_eq!(simplify_rules().len(), SIMPLIFY.len());
    }

    #[test]
    fn commutativity_alone() {
        let n = neighbors(&e("(+ x y)"), &[rule("add-comm")], GuardMode::Guarded, &pre(&[("x", 0, 1), ("y", 0, 1)]), 100);
        assert_eq!(n, vec![e("(+ y x)")]);
    }

    #[test]
    fn conjugate_then_cancel() {
        let src = e("(- (sqrt (+ x 1)) (sqrt x))");
        let n = neighbors(&src, &rules_db(), GuardMode::Unguarded, &pre(&[("x", 1, 2)]), 1000);
        let conj = e("(/ (- (+ x 1) x) (+ (sqrt (+ x 1)) (sqrt x)))");
        assert!(n.contains(&conj));
        assert_eq!(simplify(&conj), e("(/ 1 (+ (sqrt (+ x 1)) (sqrt x)))"));
    }

    #[test]
    fn difference_of_squares() {
        assert_eq!(rule("diff-square-one").apply(&e("(- (* x x) 1)")).unwrap().0, e("(* (- x 1) (+ x 1))"));
    }

    #[test]
    fn guards_block_on_unsafe_ranges() {
        let p = pre(&[("x", -1, 1), ("a", -1, 1), ("b", 2, 3)]);
        assert!(neighbors(&e("(/ x x)"), &[rule("div-self")], GuardMode::Guarded, &p, 10).is_empty());
        assert_eq!(neighbors(&e("(/ b b)"), &[rule("div-self")], GuardMode::Guarded, &p, 10), vec![e("1")]);
        let rd = e("(- (/ 1 a) (/ 1 b))");
        assert!(neighbors(&rd, &[rule("recip-diff")], GuardMode::Guarded, &p, 10).is_empty());
        assert_eq!(neighbors(&rd, &[rule("recip-diff")], GuardMode::Unguarded, &p, 10).len(), 1);
    }

    #[test]
    fn guards_see_enclosing_lets() {
        let p = pre(&[("x", 1, 2)]);
        let body = e("(let ([t (- x 3)]) (/ t t))");
        assert_eq!(neighbors(&body, &[rule("div-self")], GuardMode::Guarded, &p, 10), vec![e("(let ([t (- x 3)]) 1)")]);
        let bad = e("(let ([t (- x 1)]) (/ t t))");
        assert!(neighbors(&bad, &[rule("div-self")], GuardMode::Guarded, &p, 10).is_empty());
    }

    #[test]
    fn cap_and_order() {
        let p = pre(&[("x", 1, 2), ("y", 1, 2)]);
        let all = neighbors(&e("(+ (* x y) x)"), &rules_db(), GuardMode::Guarded, &p, 1000);
        let capped = neighbors(&e("(+ (* x y) x)"), &rules_db(), GuardMode::Guarded, &p, 2);
        assert_eq!(&all[..2], &capped[..]);
        // root rewrites first
        assert_eq!(all[0], e("(+ x (* x y))"));
    }

    #[test]
    fn text_dump() {
        let t = rules_text(&rules_db());
        assert!(t.contains("sqrt-conjugate: (- (sqrt ?a) (sqrt ?b)) => (/ (- ?a ?b) (+ (sqrt ?a) (sqrt ?b))) [nonneg ?a, nonneg ?b, nonzero (+ (sqrt ?a) (sqrt ?b))]"));
        assert_eq!(t.lines().count(), rules_db().len());
    }
}
