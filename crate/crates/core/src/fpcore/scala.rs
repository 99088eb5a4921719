//! Translation to the Scala-embedded real-arithmetic input language.

use super::expr::{BinaryOp, CmpOp, Expr, UnaryOp};
use super::parse::FpCoreProgram;
use crate::numeric::format::fpcore_number;
use crate::numeric::Rational;
use num_traits::Signed;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScalaError {
    #[error("program '{0}' has no precondition")]
    MissingPrecondition(String),
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 4;

fn number(q: &Rational) -> (String, u8) {
    let s = fpcore_number(q);
    if let Some((n, d)) = s.split_once('/') {
        return (format!("({n} / {d})"), PREC_ATOM);
    }
    let prec = if q.is_negative() { PREC_UNARY } else { PREC_ATOM };
    (s, prec)
}

fn paren(s: String, have: u8, need: u8) -> String {
    if have < need {
        format!("({s})")
    } else {
        s
    }
}

fn cmp_symbol(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "==",
        other => other.symbol(),
    }
}

/// Infix rendering with minimal parentheses; returns text and precedence.
fn infix(e: &Expr) -> (String, u8) {
    match e {
        Expr::Const(q) => number(q),
        Expr::Var(v) => (v.clone(), PREC_ATOM),
        Expr::Unary(UnaryOp::Neg, a) => {
            let (s, p) = infix(a);
            // avoid "--x"
            let s = if s.starts_with('-') { format!("({s})") } else { paren(s, p, PREC_UNARY) };
            (format!("-{s}"), PREC_UNARY)
        }
        Expr::Unary(op, a) => {
            let name = match op {
                UnaryOp::Fabs => "abs",
                other => other.symbol(),
            };
            (format!("{name}({})", infix(a).0), PREC_ATOM)
        }
        Expr::Binary(BinaryOp::Pow, a, b) => (format!("pow({}, {})", infix(a).0, infix(b).0), PREC_ATOM),
        Expr::Binary(op, a, b) => {
            let level = match op {
                BinaryOp::Add | BinaryOp::Sub => PREC_ADD,
                _ => PREC_MUL,
            };
            let (ls, lp) = infix(a);
            let (rs, rp) = infix(b);
            // right operands bind strictly tighter to keep the tree shape
            let l = paren(ls, lp, level);
            let r = paren(rs, rp, level + 1);
            (format!("{l} {} {r}", op.symbol()), level)
        }
        Expr::Let(bs, body) => {
            let mut parts: Vec<String> = bs.iter().map(|(n, v)| format!("val {n} = {}", infix(v).0)).collect();
            parts.push(infix(body).0);
            (format!("{{ {} }}", parts.join("; ")), PREC_ATOM)
        }
        Expr::If(c, t, f) => (
            format!(
                "(if ({} {} {}) {{ {} }} else {{ {} }})",
                infix(&c.lhs).0,
                cmp_symbol(c.op),
                infix(&c.rhs).0,
                infix(t).0,
                infix(f).0
            ),
            PREC_ATOM,
        ),
    }
}

/// Statement lines for a function body: top-level lets become `val` lines.
fn body_lines(e: &Expr, indent: &str, out: &mut Vec<String>) {
    match e {
        Expr::Let(bs, body) => {
            for (n, v) in bs {
                out.push(format!("{indent}val {n} = {}", infix(v).0));
            }
            body_lines(body, indent, out);
        }
        other => out.push(format!("{indent}{}", infix(other).0)),
    }
}

/// Turns an arbitrary benchmark name into a Scala identifier.
pub fn identifier(name: &str, capitalize: bool) -> String {
    let mut out = String::new();
    let mut upper_next = capitalize;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            if upper_next {
                out.push(c.to_ascii_uppercase());
                upper_next = false;
            } else {
                out.push(c);
            }
        } else {
            upper_next = !out.is_empty() || capitalize;
        }
    }
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, if capitalize { "F" } else { "f" });
    }
    out
}

fn function(p: &FpCoreProgram, fallback_name: &str) -> Result<String, ScalaError> {
    let pre = p.precondition.as_ref().ok_or_else(|| ScalaError::MissingPrecondition(p.name.clone()))?;
    let name = if p.name.is_empty() { fallback_name.to_string() } else { identifier(&p.name, false) };
    let params: Vec<String> = p.args.iter().map(|a| format!("{a}: Real")).collect();
    let conds: Vec<String> = pre
        .ranges()
        .iter()
        .map(|(v, r)| format!("{} <= {v} && {v} <= {}", number(r.lo()).0, number(r.hi()).0))
        .collect();
    let mut lines = vec![
        format!("  def {name}({}): Real = {{", params.join(", ")),
        format!("    require({})", conds.join(" && ")),
    ];
    body_lines(&p.body, "    ", &mut lines);
    lines.push("  }".to_string());
    Ok(lines.join("\n"))
}

/// Self-contained Scala object with one function per program.
pub fn emit_scala_object(object_name: &str, programs: &[FpCoreProgram]) -> Result<String, ScalaError> {
    let mut out = vec![
        "import daisy.lang._".to_string(),
        "import Real._".to_string(),
        String::new(),
        format!("object {} {{", identifier(object_name, true)),
    ];
    for (i, p) in programs.iter().enumerate() {
        out.push(String::new());
        out.push(function(p, &format!("f{i}"))?);
    }
    out.push(String::new());
    out.push("}".to_string());
    Ok(out.join("\n") + "\n")
}

/// Scala object holding a single program.
pub fn emit_scala_dsl(p: &FpCoreProgram) -> Result<String, ScalaError> {
    let object = if p.name.is_empty() { "Benchmark" } else { &p.name };
    emit_scala_object(object, std::slice::from_ref(p))
}
