//! Real-arithmetic expression trees.

use std::fmt;

use crate::numeric::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Sqrt,
    Cbrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Fabs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 9] = [
        UnaryOp::Neg,
        UnaryOp::Sqrt,
        UnaryOp::Cbrt,
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tan,
        UnaryOp::Fabs,
    ];

    /// FPCore operator symbol.
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Cbrt => "cbrt",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Fabs => "fabs",
        }
    }

    pub fn from_symbol(s: &str) -> Option<UnaryOp> {
        Some(match s {
            "sqrt" => UnaryOp::Sqrt,
            "cbrt" => UnaryOp::Cbrt,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "fabs" => UnaryOp::Fabs,
            "neg" => UnaryOp::Neg,
            _ => return None,
        })
    }
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "pow",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinaryOp> {
        Some(match s {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "pow" => BinaryOp::Pow,
            _ => return None,
        })
    }
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            _ => return None,
        })
    }

    /// Applies the comparison to an ordering of `lhs` against `rhs`.
    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub op: CmpOp,
    pub lhs: Expr,
    pub rhs: Expr,
}

/// Expression tree. `Let` binds in parallel: every binding is evaluated in the
/// enclosing scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Rational),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Let(Vec<(String, Expr)>, Box<Expr>),
    If(Box<Comparison>, Box<Expr>, Box<Expr>),
}

/// Child-index path from the root of an expression.
///
/// Children are numbered: unary operand 0; binary operands 0 and 1; `Let`
/// bindings 0..n then body n; `If` comparison sides 0 and 1, then 2, else 3.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ExprPath(pub Vec<usize>);

impl fmt::Display for ExprPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "root");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "root.{}", parts.join("."))
    }
}

impl Expr {
    pub fn constant(q: Rational) -> Expr {
        Expr::Const(q)
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Rational::from_integer(v.into()))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Number of nodes, counting each comparison side and binding.
    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => vec![],
            Expr::Unary(_, a) => vec![a],
            Expr::Binary(_, a, b) => vec![a, b],
            Expr::Let(bs, body) => bs.iter().map(|(_, e)| e).chain(std::iter::once(&**body)).collect(),
            Expr::If(c, t, e) => vec![&c.lhs, &c.rhs, t, e],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => vec![],
            Expr::Unary(_, a) => vec![a],
            Expr::Binary(_, a, b) => vec![a, b],
            Expr::Let(bs, body) => bs.iter_mut().map(|(_, e)| e).chain(std::iter::once(&mut **body)).collect(),
            Expr::If(c, t, e) => {
                let c = &mut **c;
                vec![&mut c.lhs, &mut c.rhs, t, e]
            }
        }
    }

    pub fn at(&self, path: &ExprPath) -> Option<&Expr> {
        let mut cur = self;
        for &i in &path.0 {
            cur = cur.children().into_iter().nth(i)?;
        }
        Some(cur)
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut Expr> {
        let mut cur = self;
        for &i in path {
            cur = cur.children_mut().into_iter().nth(i)?;
        }
        Some(cur)
    }

    /// Returns a copy with the subtree at `path` replaced.
    pub fn replaced_at(&self, path: &[usize], new: Expr) -> Expr {
        let mut out = self.clone();
        if let Some(slot) = out.at_mut(path) {
            *slot = new;
        }
        out
    }

    /// Pre-order list of all node paths.
    pub fn paths(&self) -> Vec<ExprPath> {
        fn go(e: &Expr, cur: &mut Vec<usize>, out: &mut Vec<ExprPath>) {
            out.push(ExprPath(cur.clone()));
            for (i, c) in e.children().into_iter().enumerate() {
                cur.push(i);
                go(c, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Free variables in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        fn go(e: &Expr, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match e {
                Expr::Var(v) => {
                    if !bound.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                Expr::Let(bs, body) => {
                    for (_, b) in bs {
                        go(b, bound, out);
                    }
                    let n = bound.len();
                    bound.extend(bs.iter().map(|(name, _)| name.clone()));
                    go(body, bound, out);
                    bound.truncate(n);
                }
                _ => {
                    for c in e.children() {
                        go(c, bound, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for Expr {
    /// FPCore s-expression syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(q) => write!(f, "{}", crate::numeric::format::fpcore_number(q)),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Unary(op, a) => write!(f, "({} {a})", op.symbol()),
            Expr::Binary(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
            Expr::Let(bs, body) => {
                write!(f, "(let (")?;
                for (i, (n, e)) in bs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "[{n} {e}]")?;
                }
                write!(f, ") {body})")
            }
            Expr::If(c, t, e) => write!(f, "(if ({} {} {}) {t} {e})", c.op.symbol(), c.lhs, c.rhs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_preorder() {
        let e = Expr::binary(BinaryOp::Add, Expr::var("x"), Expr::unary(UnaryOp::Sqrt, Expr::var("y")));
        let ps: Vec<String> = e.paths().iter().map(|p| p.to_string()).collect();
        assert_eq!(ps, ["root", "root.0", "root.1", "root.1.0"]);
        assert_eq!(e.at(&ExprPath(vec![1, 0])), Some(&Expr::var("y")));
        assert_eq!(e.node_count(), 4);
    }

    #[test]
    fn free_vars_respect_let_scope() {
        let e = Expr::Let(
            vec![("a".into(), Expr::var("x"))],
            Box::new(Expr::binary(BinaryOp::Mul, Expr::var("a"), Expr::var("y"))),
        );
        assert_eq!(e.free_vars(), ["x", "y"]);
    }
}
