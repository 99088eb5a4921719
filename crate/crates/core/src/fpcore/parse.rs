//! FPCore programs: parsing and canonical printing.

use std::collections::BTreeMap;

use log::warn;

use super::expr::{BinaryOp, CmpOp, Comparison, Expr, UnaryOp};
use super::sexpr::{read_all, Pos, Sexp, SexpError};
use crate::numeric::{format::parse_number, Interval, Rational};

/// Input ranges, one per program argument, in argument order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Precondition {
    ranges: Vec<(String, Interval)>,
}

impl Precondition {
    pub fn new(ranges: Vec<(String, Interval)>) -> Self {
        Precondition { ranges }
    }

    pub fn ranges(&self) -> &[(String, Interval)] {
        &self.ranges
    }

    pub fn get(&self, var: &str) -> Option<&Interval> {
        self.ranges.iter().find(|(v, _)| v == var).map(|(_, i)| i)
    }

    /// True when every argument has exactly one range and nothing else is listed.
    pub fn covers_exactly(&self, args: &[String]) -> bool {
        self.ranges.len() == args.len() && args.iter().all(|a| self.ranges.iter().filter(|(v, _)| v == a).count() == 1)
    }

    /// Reorders ranges to follow `args`.
    pub fn in_order(&self, args: &[String]) -> Option<Precondition> {
        let ranges = args.iter().map(|a| self.get(a).map(|i| (a.clone(), i.clone()))).collect::<Option<Vec<_>>>()?;
        Some(Precondition { ranges })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FpCoreProgram {
    /// `:name` property when present, else the FPCore identifier, else empty.
    pub name: String,
    /// Identifier given between `FPCore` and the argument list.
    pub ident: Option<String>,
    pub args: Vec<String>,
    pub precondition: Option<Precondition>,
    /// Unparsed properties keyed without the leading colon; values are the
    /// verbatim s-expression text (strings keep their quotes).
    pub properties: BTreeMap<String, String>,
    pub body: Expr,
}

impl FpCoreProgram {
    pub fn with_body(&self, body: Expr) -> FpCoreProgram {
        FpCoreProgram { body, ..self.clone() }
    }

    pub fn with_precondition(&self, pre: Precondition) -> FpCoreProgram {
        FpCoreProgram { precondition: Some(pre), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("unbound variable '{name}' at {pos}")]
    UnboundVariable { name: String, pos: Pos },
    #[error("duplicate property ':{key}' at {pos}")]
    DuplicateProperty { key: String, pos: Pos },
}

impl From<SexpError> for ParseError {
    fn from(e: SexpError) -> Self {
        ParseError::Syntax { pos: e.pos, msg: e.msg }
    }
}

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { pos, msg: msg.into() }
}

/// Parses every `FPCore` form in `text`.
pub fn parse_fpcore(text: &str) -> Result<Vec<FpCoreProgram>, ParseError> {
    read_all(text)?.iter().map(parse_program).collect()
}

/// Parses a single expression; free variables are allowed.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let items = read_all(text)?;
    match items.as_slice() {
        [one] => ExprParser { scope: Vec::new(), check_scope: false }.expr(one),
        [] => Err(syntax(Pos { line: 1, col: 1 }, "empty input")),
        [_, second, ..] => Err(syntax(second.pos(), "trailing input after expression")),
    }
}

fn parse_program(s: &Sexp) -> Result<FpCoreProgram, ParseError> {
    let items = s.as_list().ok_or_else(|| syntax(s.pos(), "expected (FPCore ...)"))?;
    match items.first().and_then(Sexp::as_atom) {
        Some("FPCore") => {}
        _ => return Err(syntax(s.pos(), "expected (FPCore ...)")),
    }
    let mut i = 1;
    let mut ident = None;
    if let Some(Sexp::Atom(a, _)) = items.get(i) {
        if !a.starts_with(':') {
            ident = Some(a.clone());
            i += 1;
        }
    }
    let arg_list = items
        .get(i)
        .and_then(Sexp::as_list)
        .ok_or_else(|| syntax(items.get(i).map_or(s.pos(), Sexp::pos), "expected argument list"))?;
    i += 1;
    let mut args = Vec::new();
    for a in arg_list {
        let name = arg_name(a)?;
        if args.contains(&name) {
            return Err(syntax(a.pos(), format!("duplicate argument '{name}'")));
        }
        args.push(name);
    }
    let mut props: Vec<(String, Sexp)> = Vec::new();
    while i + 1 < items.len() {
        match &items[i] {
            Sexp::Atom(k, pos) if k.starts_with(':') => {
                let key = k[1..].to_string();
                if props.iter().any(|(p, _)| *p == key) {
                    return Err(ParseError::DuplicateProperty { key, pos: *pos });
                }
                props.push((key, items[i + 1].clone()));
                i += 2;
            }
            _ => break,
        }
    }
    if i + 1 != items.len() {
        let pos = items.get(i).map_or(s.pos(), Sexp::pos);
        return Err(syntax(pos, "expected exactly one body expression after properties"));
    }
    let body = ExprParser { scope: args.clone(), check_scope: true }.expr(&items[i])?;

    let mut properties = BTreeMap::new();
    let mut name = ident.clone().unwrap_or_default();
    let mut precondition = None;
    for (k, v) in props {
        if k == "name" {
            if let Sexp::Str(s, _) = &v {
                name = s.clone();
            }
        }
        if k == "pre" {
            if let Some(p) = precondition_from(&v, &args) {
                precondition = Some(p);
                continue;
            }
        }
        properties.insert(k, v.to_string());
    }
    Ok(FpCoreProgram { name, ident, args, precondition, properties, body })
}

fn arg_name(a: &Sexp) -> Result<String, ParseError> {
    match a {
        Sexp::Atom(n, pos) => {
            if parse_number(n).is_some() || n.starts_with(':') {
                return Err(syntax(*pos, format!("invalid argument name '{n}'")));
            }
            Ok(n.clone())
        }
        Sexp::List { items, pos, .. } => {
            if items.first().and_then(Sexp::as_atom) == Some("!") {
                warn!("{pos}: discarding annotation on argument");
                return arg_name(items.last().expect("nonempty"));
            }
            Err(syntax(*pos, "tensor arguments are not supported"))
        }
        Sexp::Str(_, pos) => Err(syntax(*pos, "expected argument name")),
    }
}

fn literal(s: &Sexp) -> Option<Rational> {
    match s {
        Sexp::Atom(a, _) => parse_number(a),
        Sexp::List { items, .. } if items.len() == 2 && items[0].as_atom() == Some("-") => literal(&items[1]).map(|q| -q),
        _ => None,
    }
}

/// Extracts box ranges from `(<= lo x hi)` conjuncts; anything else yields None.
fn precondition_from(pre: &Sexp, args: &[String]) -> Option<Precondition> {
    let items = pre.as_list()?;
    let conjuncts: Vec<&Sexp> = match items.first()?.as_atom()? {
        "and" => items[1..].iter().collect(),
        "<=" => vec![pre],
        _ => return None,
    };
    let mut ranges = Vec::new();
    for c in conjuncts {
        let parts = c.as_list()?;
        if parts.len() != 4 || parts[0].as_atom() != Some("<=") {
            return None;
        }
        let lo = literal(&parts[1])?;
        let var = parts[2].as_atom()?.to_string();
        let hi = literal(&parts[3])?;
        ranges.push((var, Interval::new(lo, hi).ok()?));
    }
    let p = Precondition { ranges };
    if !p.covers_exactly(args) {
        return None;
    }
    p.in_order(args)
}

struct ExprParser {
    scope: Vec<String>,
    check_scope: bool,
}

impl ExprParser {
    fn expr(&mut self, s: &Sexp) -> Result<Expr, ParseError> {
        match s {
            Sexp::Atom(a, pos) => {
                if let Some(q) = parse_number(a) {
                    return Ok(Expr::Const(q));
                }
                if matches!(a.as_str(), "PI" | "E" | "INFINITY" | "NAN" | "TRUE" | "FALSE") || a.starts_with(':') || a.starts_with("0x") {
                    return Err(syntax(*pos, format!("unsupported constant '{a}'")));
                }
                if self.check_scope && !self.scope.iter().any(|v| v == a) {
                    return Err(ParseError::UnboundVariable { name: a.clone(), pos: *pos });
                }
                Ok(Expr::Var(a.clone()))
            }
            Sexp::Str(_, pos) => Err(syntax(*pos, "unexpected string in expression")),
            Sexp::List { items, pos, .. } => self.list(items, *pos),
        }
    }

    fn list(&mut self, items: &[Sexp], pos: Pos) -> Result<Expr, ParseError> {
        let head = items.first().ok_or_else(|| syntax(pos, "empty application"))?;
        let op = head.as_atom().ok_or_else(|| syntax(head.pos(), "expected operator"))?;
        let args = &items[1..];
        match op {
            "let" | "let*" => return self.let_form(op == "let*", args, pos),
            "if" => return self.if_form(args, pos),
            "!" => {
                warn!("{pos}: discarding '!' annotation");
                let inner = args.last().ok_or_else(|| syntax(pos, "empty annotation"))?;
                return self.expr(inner);
            }
            "while" | "while*" | "for" | "for*" | "tensor" | "tensor*" | "array" | "ref" | "dim" | "size" => {
                return Err(syntax(pos, format!("'{op}' is not supported")));
            }
            _ => {}
        }
        if op == "-" && args.len() == 1 {
            return Ok(Expr::unary(UnaryOp::Neg, self.expr(&args[0])?));
        }
        if let Some(u) = UnaryOp::from_symbol(op) {
            if args.len() != 1 {
                return Err(syntax(pos, format!("'{op}' takes one argument")));
            }
            return Ok(Expr::unary(u, self.expr(&args[0])?));
        }
        if let Some(b) = BinaryOp::from_symbol(op) {
            let variadic = matches!(b, BinaryOp::Add | BinaryOp::Mul | BinaryOp::Sub);
            if args.len() < 2 || (!variadic && args.len() != 2) {
                return Err(syntax(pos, format!("'{op}' takes two arguments")));
            }
            let mut acc = self.expr(&args[0])?;
            for a in &args[1..] {
                acc = Expr::binary(b, acc, self.expr(a)?);
            }
            return Ok(acc);
        }
        Err(syntax(head.pos(), format!("unsupported operator '{op}'")))
    }

    fn let_form(&mut self, sequential: bool, args: &[Sexp], pos: Pos) -> Result<Expr, ParseError> {
        if args.len() != 2 {
            return Err(syntax(pos, "let expects bindings and a body"));
        }
        let bindings = args[0].as_list().ok_or_else(|| syntax(args[0].pos(), "expected binding list"))?;
        let mut parsed = Vec::new();
        let depth = self.scope.len();
        for b in bindings {
            let parts = b.as_list().ok_or_else(|| syntax(b.pos(), "expected [name expr]"))?;
            if parts.len() != 2 {
                return Err(syntax(b.pos(), "expected [name expr]"));
            }
            let name = parts[0].as_atom().ok_or_else(|| syntax(parts[0].pos(), "expected binding name"))?.to_string();
            let value = self.expr(&parts[1])?;
            if sequential {
                self.scope.push(name.clone());
            }
            parsed.push((name, value));
        }
        if !sequential {
            self.scope.extend(parsed.iter().map(|(n, _)| n.clone()));
        }
        let body = self.expr(&args[1]);
        self.scope.truncate(depth);
        let body = body?;
        if sequential {
            Ok(parsed.into_iter().rev().fold(body, |acc, b| Expr::Let(vec![b], Box::new(acc))))
        } else {
            Ok(Expr::Let(parsed, Box::new(body)))
        }
    }

    fn if_form(&mut self, args: &[Sexp], pos: Pos) -> Result<Expr, ParseError> {
        if args.len() != 3 {
            return Err(syntax(pos, "if expects condition, then and else"));
        }
        let cond = args[0].as_list().ok_or_else(|| syntax(args[0].pos(), "expected comparison"))?;
        let op = cond
            .first()
            .and_then(Sexp::as_atom)
            .and_then(CmpOp::from_symbol)
            .ok_or_else(|| syntax(args[0].pos(), "condition must be a binary comparison"))?;
        if cond.len() != 3 {
            return Err(syntax(args[0].pos(), "condition must be a binary comparison"));
        }
        let cmp = Comparison { op, lhs: self.expr(&cond[1])?, rhs: self.expr(&cond[2])? };
        let t = self.expr(&args[1])?;
        let e = self.expr(&args[2])?;
        Ok(Expr::If(Box::new(cmp), Box::new(t), Box::new(e)))
    }
}

/// Canonical FPCore text; re-parses to a structurally equal program.
pub fn emit_fpcore(p: &FpCoreProgram) -> String {
    let mut out = String::from("(FPCore ");
    if let Some(id) = &p.ident {
        out.push_str(id);
        out.push(' ');
    }
    out.push('(');
    out.push_str(&p.args.join(" "));
    out.push(')');
    for (k, v) in &p.properties {
        out.push_str(&format!("\n  :{k} {v}"));
    }
    if let Some(pre) = &p.precondition {
        out.push_str("\n  :pre ");
        out.push_str(&precondition_sexp(pre));
    }
    out.push_str(&format!("\n  {})", p.body));
    out
}

pub fn precondition_sexp(pre: &Precondition) -> String {
    let parts: Vec<String> = pre
        .ranges()
        .iter()
        .map(|(v, r)| {
            format!(
                "(<= {} {v} {})",
                crate::numeric::format::fpcore_number(r.lo()),
                crate::numeric::format::fpcore_number(r.hi())
            )
        })
        .collect();
    format!("(and {})", parts.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_precondition_ranges() {
        let ps = parse_fpcore("(FPCore (x) :pre (<= 1 x 2) (- (sqrt (+ x 1)) (sqrt x)))").unwrap();
        assert_eq!(ps.len(), 1);
        let pre = ps[0].precondition.as_ref().unwrap();
        assert_eq!(pre.get("x"), Some(&Interval::from_ints(1, 2).unwrap()));
        assert_eq!(ps[0].body.to_string(), "(- (sqrt (+ x 1)) (sqrt x))");
    }

    #[test]
    fn name_property_is_kept() {
        let ps = parse_fpcore("(FPCore (a b) :name \"kepler0-frag\" (* a b))").unwrap();
        assert_eq!(ps[0].name, "kepler0-frag");
        assert_eq!(ps[0].properties.get("name").map(String::as_str), Some("\"kepler0-frag\""));
        assert!(ps[0].precondition.is_none());
    }

    #[test]
    fn opaque_precondition_is_preserved() {
        let src = "(FPCore (a b) :pre (and (<= 1 a 2) (< a b)) (+ a b))";
        let p = &parse_fpcore(src).unwrap()[0];
        assert!(p.precondition.is_none());
        assert_eq!(p.properties["pre"], "(and (<= 1 a 2) (< a b))");
        // partial coverage is also opaque
        let p = &parse_fpcore("(FPCore (a b) :pre (<= 1 a 2) (+ a b))").unwrap()[0];
        assert!(p.precondition.is_none());
    }

    #[test]
    fn errors_carry_positions() {
        match parse_fpcore("(FPCore (x)\n  (+ x y))") {
            Err(ParseError::UnboundVariable { name, pos }) => {
                assert_eq!(name, "y");
                assert_eq!(pos, Pos { line: 2, col: 8 });
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_fpcore("(FPCore (x) :name \"a\" :name \"b\" x)"),
            Err(ParseError::DuplicateProperty { .. })
        ));
        assert!(matches!(parse_fpcore("(FPCore (x) (+ x 1)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_fpcore("(FPCore (x) (while (< x 1) x))"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_fpcore("(FPCore (x) (atan2 x 1))"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn tan_parses() {
        let p = &parse_fpcore("(FPCore (x) (tan x))").unwrap()[0];
        assert_eq!(p.body, Expr::unary(UnaryOp::Tan, Expr::var("x")));
    }

    #[test]
    fn annotations_are_discarded() {
        let p = &parse_fpcore("(FPCore ((! :precision binary64 x)) (! :precision binary64 (+ x 1)))").unwrap()[0];
        assert_eq!(p.args, ["x"]);
        assert_eq!(p.body.to_string(), "(+ x 1)");
    }

    #[test]
    fn let_forms() {
        let p = &parse_fpcore("(FPCore (x) (let ([a (+ x 1)] [b x]) (* a b)))").unwrap()[0];
        let text = emit_fpcore(p);
        assert_eq!(parse_fpcore(&text).unwrap()[0], *p);
        // let* nests and sees earlier bindings
        let p = &parse_fpcore("(FPCore (x) (let* ([a (+ x 1)] [b a]) (* a b)))").unwrap()[0];
        assert!(matches!(&p.body, Expr::Let(bs, inner) if bs.len() == 1 && matches!(**inner, Expr::Let(..))));
        // plain let does not see sibling bindings
        assert!(parse_fpcore("(FPCore (x) (let ([a x] [b a]) b))").is_err());
    }

    #[test]
    fn multiple_cores_and_identifiers() {
        let ps = parse_fpcore("(FPCore f (x) x) (FPCore (y) :name \"g\" (- y))").unwrap();
        assert_eq!(ps[0].name, "f");
        assert_eq!(ps[1].name, "g");
        for p in &ps {
            assert_eq!(parse_fpcore(&emit_fpcore(p)).unwrap()[0], *p);
        }
    }

    #[test]
    fn negative_and_variadic_forms() {
        let p = &parse_fpcore("(FPCore (x) :pre (<= (- 2) x -1) (+ x 1 2))").unwrap()[0];
        assert_eq!(p.precondition.as_ref().unwrap().get("x"), Some(&Interval::from_ints(-2, -1).unwrap()));
        assert_eq!(p.body.to_string(), "(+ (+ x 1) 2)");
    }
}
