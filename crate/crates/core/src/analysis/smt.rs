//! SMT-LIB 2 range queries over nonlinear real arithmetic.
//!
//! Square and cube roots become auxiliary constants constrained by their
//! defining polynomial equations; functions outside QF_NRA become auxiliary
//! constants bounded by an interval enclosure. Both abstractions only add
//! models, so `unsat` remains a proof.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use num_traits::{Signed, Zero};

use super::ia::int_exponent;
use crate::deadline::Deadline;
use crate::fpcore::{BinaryOp, CmpOp, Expr, FpCoreProgram, UnaryOp};
use crate::numeric::transcendental as tr;
use crate::numeric::{DInterval, Interval, Rational};

const RANGE_PRECISION: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lo,
    Hi,
}

#[derive(Debug, thiserror::Error)]
pub enum SmtError {
    #[error("program '{0}' has no precondition")]
    MissingPrecondition(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("solver run exceeded the time budget")]
    Timeout,
}

fn number(q: &Rational) -> String {
    let mag = q.abs();
    let s = if mag.is_integer() {
        format!("{}.0", mag.numer())
    } else {
        format!("(/ {}.0 {}.0)", mag.numer(), mag.denom())
    };
    if q.is_negative() {
        format!("(- {s})")
    } else {
        s
    }
}

fn dyadic_number(d: &crate::numeric::Dyadic) -> String {
    number(&d.to_rational())
}

fn symbol(name: &str) -> String {
    let simple = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "_.".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{}|", name.replace('|', "_"))
    }
}

struct Scoped {
    name: String,
    sym: String,
    range: Option<DInterval>,
}

#[derive(Default)]
struct Emitter {
    lines: Vec<String>,
    fresh: usize,
}

impl Emitter {
    fn aux(&mut self, prefix: &str) -> String {
        let s = format!("{prefix}!{}", self.fresh);
        self.fresh += 1;
        self.lines.push(format!("(declare-const {s} Real)"));
        s
    }

    fn bound(&mut self, sym: &str, r: &DInterval) {
        self.lines.push(format!("(assert (and (<= {} {sym}) (<= {sym} {})))", dyadic_number(&r.lo), dyadic_number(&r.hi)));
    }

    fn opaque(&mut self, r: Option<DInterval>) -> (String, Option<DInterval>) {
        let s = self.aux("aux");
        if let Some(r) = &r {
            self.bound(&s, r);
        }
        (s, r)
    }

    fn term(&mut self, e: &Expr, scope: &mut Vec<Scoped>) -> (String, Option<DInterval>) {
        let p = RANGE_PRECISION;
        match e {
            Expr::Const(q) => (number(q), Some(DInterval::from_rational(q, p))),
            Expr::Var(v) => {
                let s = scope.iter().rev().find(|s| &s.name == v).expect("bound variable");
                (s.sym.clone(), s.range.clone())
            }
            Expr::Unary(op, a) => {
                let (t, r) = self.term(a, scope);
                match op {
                    UnaryOp::Neg => (format!("(- {t})"), r.map(|r| r.neg())),
                    UnaryOp::Fabs => (format!("(ite (>= {t} 0.0) {t} (- {t}))"), r.map(|r| r.abs())),
                    UnaryOp::Sqrt => {
                        let s = self.aux("sqrt");
                        self.lines.push(format!("(assert (>= {s} 0.0))"));
                        self.lines.push(format!("(assert (= (* {s} {s}) {t}))"));
                        (s, r.and_then(|r| tr::sqrt_iv(&r, p).ok()))
                    }
                    UnaryOp::Cbrt => {
                        let c = self.aux("cbrt");
                        self.lines.push(format!("(assert (= (* {c} {c} {c}) {t}))"));
                        (c, r.map(|r| tr::cbrt_iv(&r, p)))
                    }
                    UnaryOp::Exp => self.opaque(r.and_then(|r| tr::exp_iv(&r, p).ok())),
                    UnaryOp::Log => self.opaque(r.and_then(|r| tr::log_iv(&r, p).ok())),
                    UnaryOp::Sin => self.opaque(Some(r.map_or_else(unit, |r| tr::sin_iv(&r, p)))),
                    UnaryOp::Cos => self.opaque(Some(r.map_or_else(unit, |r| tr::cos_iv(&r, p)))),
                    UnaryOp::Tan => self.opaque(None),
                }
            }
            Expr::Binary(BinaryOp::Pow, a, b) => match int_exponent(b) {
                Some(0) => ("1.0".to_string(), Some(DInterval::one())),
                Some(n) => {
                    let (t, r) = self.term(a, scope);
                    let factors = vec![t; n.unsigned_abs() as usize].join(" ");
                    let prod = if n.abs() == 1 { factors } else { format!("(* {factors})") };
                    let pr = r.map(|r| r.pow_u(n.unsigned_abs() as u32, p));
                    if n > 0 {
                        (prod, pr)
                    } else {
                        self.lines.push(format!("(assert (not (= {prod} 0.0)))"));
                        let inv = pr.and_then(|r| DInterval::one().div(&r, p));
                        (format!("(/ 1.0 {prod})"), inv)
                    }
                }
                None => {
                    self.term(a, scope);
                    self.term(b, scope);
                    self.opaque(None)
                }
            },
            Expr::Binary(op, a, b) => {
                let (ta, ra) = self.term(a, scope);
                let (tb, rb) = self.term(b, scope);
                let r = match (ra, rb) {
                    (Some(x), Some(y)) => match op {
                        BinaryOp::Add => Some(x.add(&y, p)),
                        BinaryOp::Sub => Some(x.sub(&y, p)),
                        BinaryOp::Mul => Some(x.mul(&y, p)),
                        BinaryOp::Div => x.div(&y, p),
                        BinaryOp::Pow => unreachable!("handled above"),
                    },
                    _ => None,
                };
                if *op == BinaryOp::Div {
                    self.lines.push(format!("(assert (not (= {tb} 0.0)))"));
                }
                (format!("({} {ta} {tb})", op.symbol()), r)
            }
            Expr::Let(bindings, body) => {
                let mut fresh = Vec::new();
                for (name, v) in bindings {
                    let (t, r) = self.term(v, scope);
                    let s = self.aux("let");
                    self.lines.push(format!("(assert (= {s} {t}))"));
                    fresh.push(Scoped { name: name.clone(), sym: s, range: r });
                }
                let mark = scope.len();
                scope.extend(fresh);
                let out = self.term(body, scope);
                scope.truncate(mark);
                out
            }
            Expr::If(c, t, f) => {
                let (l, _) = self.term(&c.lhs, scope);
                let (r, _) = self.term(&c.rhs, scope);
                let cond = match c.op {
                    CmpOp::Ne => format!("(not (= {l} {r}))"),
                    op => format!("({} {l} {r})", op.symbol()),
                };
                let (tt, rt) = self.term(t, scope);
                let (tf, rf) = self.term(f, scope);
                let range = match (rt, rf) {
                    (Some(a), Some(b)) => Some(a.hull(&b)),
                    _ => None,
                };
                (format!("(ite {cond} {tt} {tf})"), range)
            }
        }
    }
}

fn unit() -> DInterval {
    DInterval::new(crate::numeric::Dyadic::from_i64(-1), crate::numeric::Dyadic::one())
}

/// Script asserting the precondition, the candidate range, and that the root
/// lies strictly beyond `probe` on `side`. `unsat` certifies that the range
/// side can be tightened to `probe`.
pub fn emit_smt_query(program: &FpCoreProgram, candidate_range: &Interval, side: Side, probe: &Rational) -> Result<String, SmtError> {
    let pre = program
        .precondition
        .as_ref()
        .ok_or_else(|| SmtError::MissingPrecondition(program.name.clone()))?;
    let mut em = Emitter::default();
    em.lines.push("(set-logic QF_NRA)".to_string());
    let mut scope = Vec::new();
    for a in &program.args {
        let sym = symbol(a);
        em.lines.push(format!("(declare-const {sym} Real)"));
        let range = pre.get(a).map(|r| r.to_dinterval(RANGE_PRECISION));
        if let Some(r) = pre.get(a) {
            em.lines.push(format!("(assert (and (<= {} {sym}) (<= {sym} {})))", number(r.lo()), number(r.hi())));
        }
        scope.push(Scoped { name: a.clone(), sym, range });
    }
    let (t, _) = em.term(&program.body, &mut scope);
    em.lines.push("(declare-const root! Real)".to_string());
    em.lines.push(format!("(assert (= root! {t}))"));
    em.lines.push(format!(
        "(assert (and (<= {} root!) (<= root! {})))",
        number(candidate_range.lo()),
        number(candidate_range.hi())
    ));
    let beyond = match side {
        Side::Hi => ">",
        Side::Lo => "<",
    };
    em.lines.push(format!("(assert ({beyond} root! {}))", number(probe)));
    em.lines.push("(check-sat)".to_string());
    em.lines.push("(exit)".to_string());
    Ok(em.lines.join("\n") + "\n")
}

static SCRIPT_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Runs `solver SCRIPT` and reports whether its first output line is `unsat`.
fn solver_says_unsat(solver: &Path, script: &str, deadline: &Deadline) -> Result<bool, SmtError> {
    let n = SCRIPT_COUNTER.fetch_add(1, Ordering::Relaxed);
    let file = std::env::temp_dir().join(format!("fpv-{}-{n}.smt2", std::process::id()));
    std::fs::write(&file, script).map_err(|e| SmtError::Solver(e.to_string()))?;
    let result = (|| {
        let mut child = Command::new(solver)
            .arg(&file)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SmtError::Solver(format!("{}: {e}", solver.display())))?;
        loop {
            if child.try_wait().map_err(|e| SmtError::Solver(e.to_string()))?.is_some() {
                break;
            }
            if deadline.expired() {
                let _ = child.kill();
                let _ = child.wait();
                return Err(SmtError::Timeout);
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        let mut out = String::new();
        if let Some(mut s) = child.stdout.take() {
            s.read_to_string(&mut out).map_err(|e| SmtError::Solver(e.to_string()))?;
        }
        Ok(out.lines().map(str::trim).find(|l| !l.is_empty()) == Some("unsat"))
    })();
    let _ = std::fs::remove_file(&file);
    result
}

/// Tightens each side of `range` by bisection with at most `probes_per_side`
/// solver calls per side. Solver failures leave the side unchanged.
pub fn refine_range_with_solver(
    program: &FpCoreProgram,
    range: &Interval,
    solver: &Path,
    probes_per_side: u32,
    deadline: &Deadline,
) -> Result<Interval, SmtError> {
    let two = Rational::from_integer(2.into());
    let mut lo = range.lo().clone();
    let mut hi = range.hi().clone();
    if lo == hi {
        return Ok(range.clone());
    }
    // hi side: the root never exceeds `hi`; search in (mid, hi]
    let (mut keep, mut tight) = (lo.clone(), hi.clone());
    for _ in 0..probes_per_side {
        let probe = (&keep + &tight) / &two;
        let cur = Interval::new(lo.clone(), tight.clone()).expect("ordered");
        if solver_says_unsat(solver, &emit_smt_query(program, &cur, Side::Hi, &probe)?, deadline)? {
            tight = probe;
        } else {
            keep = probe;
        }
    }
    hi = tight;
    let (mut keep, mut tight) = (hi.clone(), lo.clone());
    for _ in 0..probes_per_side {
        let probe = (&keep + &tight) / &two;
        let cur = Interval::new(tight.clone(), hi.clone()).expect("ordered");
        if solver_says_unsat(solver, &emit_smt_query(program, &cur, Side::Lo, &probe)?, deadline)? {
            tight = probe;
        } else {
            keep = probe;
        }
    }
    lo = tight;
    if lo > hi || (lo.is_zero() && hi.is_zero() && range.lo() != range.hi()) {
        // inconsistent answers; keep the analysed range
        return Ok(range.clone());
    }
    Ok(Interval::new(lo, hi).expect("ordered"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpcore::parse_fpcore;
    use crate::fpcore::sexpr::{read_all, Sexp};
    use crate::numeric::rational;
    use std::collections::HashMap;

    fn prog(src: &str) -> FpCoreProgram {
        parse_fpcore(src).unwrap().remove(0)
    }

    /// Evaluates the script's assertions at an assignment of the arguments,
    /// treating `(assert (= sym term))` with unassigned `sym` as a definition.
    fn holds_at(script: &str, args: &[(&str, f64)]) -> bool {
        let mut env: HashMap<String, f64> = args.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        fn num(e: &Sexp, env: &HashMap<String, f64>) -> f64 {
            match e {
                Sexp::Atom(text, _) => env.get(text).copied().unwrap_or_else(|| text.parse().unwrap()),
                Sexp::List { items, .. } => {
                    let op = items[0].as_atom().unwrap();
                    let v: Vec<f64> = items[1..].iter().map(|x| num(x, env)).collect();
                    match (op, v.len()) {
                        ("-", 1) => -v[0],
                        ("-", _) => v[0] - v[1],
                        ("+", _) => v.iter().sum(),
                        ("*", _) => v.iter().product(),
                        ("/", _) => v[0] / v[1],
                        _ => panic!("unsupported {op}"),
                    }
                }
                _ => panic!("unexpected"),
            }
        }
        fn truth(e: &Sexp, env: &HashMap<String, f64>) -> bool {
            let items = e.as_list().unwrap();
            let op = items[0].as_atom().unwrap();
            match op {
                "and" => items[1..].iter().all(|x| truth(x, env)),
                "not" => !truth(&items[1], env),
                _ => {
                    let (a, b) = (num(&items[1], env), num(&items[2], env));
                    match op {
                        "<=" => a <= b,
                        "<" => a < b,
                        ">=" => a >= b,
                        ">" => a > b,
                        "=" => a == b,
                        _ => panic!("unsupported {op}"),
                    }
                }
            }
        }
        for form in read_all(script).unwrap() {
            let items = form.as_list().unwrap();
            if items[0].as_atom() != Some("assert") {
                continue;
            }
            let body = items[1].as_list().unwrap();
            if body[0].as_atom() == Some("=") {
                if let Some(name) = body[1].as_atom() {
                    if !env.contains_key(name) && name.parse::<f64>().is_err() {
                        let v = num(&body[2], &env);
                        env.insert(name.to_string(), v);
                        continue;
                    }
                }
            }
            if !truth(&items[1], &env) {
                return false;
            }
        }
        true
    }

    #[test]
    fn format_contract() {
        let p = prog("(FPCore (x) :pre (<= 1 x 2) (+ x 1))");
        let s = emit_smt_query(&p, &Interval::from_ints(2, 3).unwrap(), Side::Hi, &rational("3.5").unwrap()).unwrap();
        assert!(s.starts_with("(set-logic QF_NRA)\n"), "{s}");
        assert!(s.contains("(declare-const x Real)"));
        assert!(s.contains("(assert (> root! (/ 7.0 2.0)))"), "{s}");
        assert!(s.trim_end().ends_with("(check-sat)\n(exit)"));
    }

    #[test]
    fn probe_beyond_the_range_has_no_witness() {
        let p = prog("(FPCore (x) :pre (<= 1 x 2) (+ x 1))");
        let range = Interval::from_ints(2, 3).unwrap();
        let unsat = emit_smt_query(&p, &range, Side::Hi, &rational("3.5").unwrap()).unwrap();
        for i in 0..=1000 {
            let x = 1.0 + i as f64 / 1000.0;
            assert!(!holds_at(&unsat, &[("x", x)]), "witness at {x}");
        }
        let sat = emit_smt_query(&p, &range, Side::Hi, &rational("2.5").unwrap()).unwrap();
        assert!(holds_at(&sat, &[("x", 1.8)]));
        let lo = emit_smt_query(&p, &range, Side::Lo, &rational("2.5").unwrap()).unwrap();
        assert!(holds_at(&lo, &[("x", 1.2)]));
    }

    #[test]
    fn roots_and_opaque_functions_are_constrained() {
        let p = prog("(FPCore (x y) :pre (and (<= 0 x 1) (<= 1 y 2)) (let ([a (sqrt x)]) (+ a (exp y))))");
        let s = emit_smt_query(&p, &Interval::from_ints(0, 10).unwrap(), Side::Hi, &rational("9").unwrap()).unwrap();
        assert!(s.contains("(assert (= (* sqrt!0 sqrt!0) x))"), "{s}");
        assert!(s.contains("(declare-const aux!2 Real)"), "{s}");
        assert!(s.contains("(assert (and (<= (/ "), "{s}");
        for form in read_all(&s).unwrap() {
            assert!(matches!(form, Sexp::List { .. }));
        }
    }

    #[test]
    fn missing_precondition() {
        let p = prog("(FPCore (x) (+ x 1))");
        assert!(emit_smt_query(&p, &Interval::from_ints(0, 1).unwrap(), Side::Lo, &Rational::zero()).is_err());
    }

    #[cfg(unix)]
    #[test]
    fn bisection_with_a_scripted_solver() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("solver.sh");
        // answers unsat for every probe: each side moves toward the midpoint
        std::fs::write(&path, "#!/bin/sh\necho unsat\n").unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        let p = prog("(FPCore (x) :pre (<= 1 x 2) (+ x 1))");
        let r = refine_range_with_solver(&p, &Interval::from_ints(0, 16).unwrap(), &path, 3, &Deadline::none()).unwrap();
        assert!(r.hi() < &rational("16").unwrap());
        assert!(r.lo() > &rational("0").unwrap());
        assert!(r.lo() <= r.hi());
    }
}
