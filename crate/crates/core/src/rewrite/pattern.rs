//! Expression patterns with `?name` metavariables.

use std::fmt;

use crate::fpcore::sexpr::{read_all, Sexp};
use crate::fpcore::{BinaryOp, Expr, UnaryOp};
use crate::numeric::format::{fpcore_number, parse_number};
use crate::numeric::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Meta(String),
    Const(Rational),
    Unary(UnaryOp, Box<Pattern>),
    Binary(BinaryOp, Box<Pattern>, Box<Pattern>),
}

pub type Bindings = Vec<(String, Expr)>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad pattern '{text}': {msg}")]
pub struct PatternError {
    pub text: String,
    pub msg: String,
}

impl Pattern {
    pub fn parse(text: &str) -> Result<Pattern, PatternError> {
        let err = |msg: &str| PatternError { text: text.to_string(), msg: msg.to_string() };
        let forms = read_all(text).map_err(|e| err(&e.to_string()))?;
        match forms.as_slice() {
            [one] => from_sexp(one).map_err(|m| err(&m)),
            _ => Err(err("expected exactly one form")),
        }
    }

    /// Metavariables in first-occurrence order.
    pub fn metavars(&self) -> Vec<String> {
        fn go(p: &Pattern, out: &mut Vec<String>) {
            match p {
                Pattern::Meta(m) => {
                    if !out.contains(m) {
                        out.push(m.clone());
                    }
                }
                Pattern::Const(_) => {}
                Pattern::Unary(_, a) => go(a, out),
                Pattern::Binary(_, a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    /// Matches `e`, extending `b`; repeated metavariables need equal subtrees.
    pub fn matches(&self, e: &Expr, b: &mut Bindings) -> bool {
        match (self, e) {
            (Pattern::Meta(m), _) => match b.iter().find(|(n, _)| n == m) {
                Some((_, bound)) => bound == e,
                None => {
                    b.push((m.clone(), e.clone()));
                    true
                }
            },
            (Pattern::Const(q), Expr::Const(c)) => q == c,
            (Pattern::Unary(op, a), Expr::Unary(eop, ea)) => op == eop && a.matches(ea, b),
            (Pattern::Binary(op, a, c), Expr::Binary(eop, ea, ec)) => op == eop && a.matches(ea, b) && c.matches(ec, b),
            _ => false,
        }
    }

    pub fn match_expr(&self, e: &Expr) -> Option<Bindings> {
        let mut b = Vec::new();
        self.matches(e, &mut b).then_some(b)
    }

    /// Substitutes bindings; every metavariable must be bound.
    pub fn instantiate(&self, b: &Bindings) -> Expr {
        match self {
            Pattern::Meta(m) => b.iter().find(|(n, _)| n == m).map(|(_, e)| e.clone()).expect("bound metavariable"),
            Pattern::Const(q) => Expr::Const(q.clone()),
            Pattern::Unary(op, a) => Expr::unary(*op, a.instantiate(b)),
            Pattern::Binary(op, a, c) => Expr::binary(*op, a.instantiate(b), c.instantiate(b)),
        }
    }

    /// The pattern read as an expression over variables named like the metavariables.
    pub fn to_expr(&self) -> Expr {
        match self {
            Pattern::Meta(m) => Expr::Var(m.clone()),
            Pattern::Const(q) => Expr::Const(q.clone()),
            Pattern::Unary(op, a) => Expr::unary(*op, a.to_expr()),
            Pattern::Binary(op, a, c) => Expr::binary(*op, a.to_expr(), c.to_expr()),
        }
    }
}

fn from_sexp(s: &Sexp) -> Result<Pattern, String> {
    match s {
        Sexp::Atom(a, _) => {
            if let Some(m) = a.strip_prefix('?') {
                if m.is_empty() {
                    return Err("empty metavariable".into());
                }
                Ok(Pattern::Meta(m.to_string()))
            } else {
                parse_number(a).map(Pattern::Const).ok_or_else(|| format!("unknown atom {a}"))
            }
        }
        Sexp::Str(..) => Err("strings are not patterns".into()),
        Sexp::List { items, .. } => {
            let (head, args) = items.split_first().ok_or("empty list")?;
            let op = head.as_atom().ok_or("operator must be an atom")?;
            let args: Vec<Pattern> = args.iter().map(from_sexp).collect::<Result<_, _>>()?;
            let mut args = args.into_iter();
            match (op, args.len()) {
                ("-", 1) => Ok(Pattern::Unary(UnaryOp::Neg, Box::new(args.next().expect("one")))),
                (_, 1) => {
                    let u = UnaryOp::from_symbol(op).ok_or_else(|| format!("unknown unary {op}"))?;
                    Ok(Pattern::Unary(u, Box::new(args.next().expect("one"))))
                }
                (_, 2) => {
                    let b = BinaryOp::from_symbol(op).ok_or_else(|| format!("unknown binary {op}"))?;
                    let (x, y) = (args.next().expect("two"), args.next().expect("two"));
                    Ok(Pattern::Binary(b, Box::new(x), Box::new(y)))
                }
                _ => Err(format!("bad arity for {op}")),
            }
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Meta(m) => write!(f, "?{m}"),
            Pattern::Const(q) => write!(f, "{}", fpcore_number(q)),
            Pattern::Unary(op, a) => write!(f, "({} {a})", op.symbol()),
            Pattern::Binary(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
        }
    }
}
