//! Correctly bracketed real evaluation of expressions.
//!
//! Values stay exact rationals while every operation is closed over the
//! rationals (field operations, integer powers, roots of perfect powers, and
//! trivial transcendental points) and fall back to dyadic interval enclosures
//! otherwise. Precision doubles from 128 to 4096 bits until the requested
//! width is met.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::dinterval::DInterval;
use super::dyadic::Dyadic;
use super::interval::Interval;
use super::transcendental::{self as tr, TranscError};
use super::Rational;
use crate::fpcore::{BinaryOp, CmpOp, Expr, ExprPath, UnaryOp};

pub const START_PRECISION: u32 = 128;
pub const MAX_PRECISION: u32 = 4096;
/// Exact intermediates larger than this many bits are demoted to enclosures.
const EXACT_BITS_LIMIT: u64 = 1 << 14;
/// Enclosure endpoints beyond 2^±EXPONENT_LIMIT are reported as out of range.
const EXPONENT_LIMIT: i64 = 1 << 20;
const MAX_INT_POW: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RealError {
    #[error("{op} domain violation at {path}")]
    Domain { op: &'static str, path: ExprPath },
    #[error("could not resolve a domain check or branch at {MAX_PRECISION} bits")]
    Unresolved,
    #[error("value magnitude outside the supported range")]
    OutOfRange,
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Outcome of [`eval_real`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealValue {
    pub enclosure: Interval,
    /// False when the width target was not met at the precision cap.
    pub conclusive: bool,
    pub precision_bits: u32,
}

/// A real value: exact, or enclosed by a dyadic interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Truth {
    Exact(Rational),
    Approx(DInterval),
}

impl Truth {
    fn enclosure(&self, prec: u32) -> DInterval {
        match self {
            Truth::Exact(q) => DInterval::from_rational(q, prec),
            Truth::Approx(d) => d.clone(),
        }
    }

    /// Rational endpoints of the enclosure.
    pub fn bounds(&self) -> (Rational, Rational) {
        match self {
            Truth::Exact(q) => (q.clone(), q.clone()),
            Truth::Approx(d) => (d.lo.to_rational(), d.hi.to_rational()),
        }
    }

    /// Upper bound on `|x - v|` over every `v` in the enclosure.
    pub fn abs_err_upper(&self, x: f64) -> Rational {
        let xq = super::float::f64_to_rational(x).expect("finite");
        match self {
            Truth::Exact(q) => (xq - q).abs(),
            Truth::Approx(d) => {
                let xd = Dyadic::from_f64(x).expect("finite");
                let a = xd.sub(&d.lo).abs();
                let b = xd.sub(&d.hi).abs();
                Dyadic::max(&a, &b).to_rational()
            }
        }
    }
}

enum Fail {
    Domain(&'static str, Vec<usize>),
    Undecided,
    OutOfRange,
    Unbound(String),
    Unsupported(String),
}

impl From<TranscError> for Fail {
    fn from(e: TranscError) -> Self {
        match e {
            TranscError::Domain => Fail::Undecided,
            TranscError::OutOfRange => Fail::OutOfRange,
        }
    }
}

fn rational_bits(q: &Rational) -> u64 {
    q.numer().bits() + q.denom().bits()
}

fn is_perfect_square(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let s = n.sqrt();
    (&s * &s == *n).then_some(s)
}

fn perfect_cube(n: &BigInt) -> Option<BigInt> {
    let s = n.cbrt();
    (&s * &s * &s == *n).then_some(s)
}

struct Evaluator<'a> {
    prec: u32,
    env: Vec<(&'a str, Truth)>,
    path: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    fn lookup(&self, name: &str) -> Result<Truth, Fail> {
        self.env
            .iter()
            .rev()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Fail::Unbound(name.to_string()))
    }

    fn exact_or_demote(&self, q: Rational) -> Truth {
        if rational_bits(&q) > EXACT_BITS_LIMIT {
            Truth::Approx(DInterval::from_rational(&q, self.prec))
        } else {
            Truth::Exact(q)
        }
    }

    fn domain(&self, op: &'static str) -> Fail {
        Fail::Domain(op, self.path.clone())
    }

    fn child(&mut self, i: usize, e: &'a Expr) -> Result<Truth, Fail> {
        self.path.push(i);
        let r = self.eval(e);
        self.path.pop();
        r
    }

    fn eval(&mut self, e: &'a Expr) -> Result<Truth, Fail> {
        let p = self.prec;
        match e {
            Expr::Const(q) => Ok(Truth::Exact(q.clone())),
            Expr::Var(v) => self.lookup(v),
            Expr::Unary(op, a) => {
                let a = self.child(0, a)?;
                self.unary(*op, a)
            }
            Expr::Binary(op, a, b) => {
                let a = self.child(0, a)?;
                let b = self.child(1, b)?;
                self.binary(*op, a, b)
            }
            Expr::Let(bs, body) => {
                let mut vals = Vec::with_capacity(bs.len());
                for (i, (name, be)) in bs.iter().enumerate() {
                    vals.push((name.as_str(), self.child(i, be)?));
                }
                let n = self.env.len();
                self.env.extend(vals);
                let r = self.child(bs.len(), body);
                self.env.truncate(n);
                r
            }
            Expr::If(c, t, f) => {
                let l = self.child(0, &c.lhs)?;
                let r = self.child(1, &c.rhs)?;
                let ord = match (&l, &r) {
                    (Truth::Exact(x), Truth::Exact(y)) => x.cmp(y),
                    _ => {
                        let (x, y) = (l.enclosure(p), r.enclosure(p));
                        if x.hi < y.lo {
                            std::cmp::Ordering::Less
                        } else if x.lo > y.hi {
                            std::cmp::Ordering::Greater
                        } else {
                            return Err(Fail::Undecided);
                        }
                    }
                };
                if c.op.holds(ord) {
                    self.child(2, t)
                } else {
                    self.child(3, f)
                }
            }
        }
    }

    fn unary(&mut self, op: UnaryOp, a: Truth) -> Result<Truth, Fail> {
        let p = self.prec;
        Ok(match op {
            UnaryOp::Neg => match a {
                Truth::Exact(q) => Truth::Exact(-q),
                Truth::Approx(d) => Truth::Approx(d.neg()),
            },
            UnaryOp::Fabs => match a {
                Truth::Exact(q) => Truth::Exact(q.abs()),
                Truth::Approx(d) => Truth::Approx(d.abs()),
            },
            UnaryOp::Sqrt => match a {
                Truth::Exact(q) => {
                    if q.is_negative() {
                        return Err(self.domain("sqrt"));
                    }
                    match (is_perfect_square(q.numer()), is_perfect_square(q.denom())) {
                        (Some(n), Some(d)) => Truth::Exact(Rational::new(n, d)),
                        _ => Truth::Approx(tr::sqrt_iv(&DInterval::from_rational(&q, p + 8), p)?),
                    }
                }
                Truth::Approx(d) => {
                    if d.hi.is_negative() {
                        return Err(self.domain("sqrt"));
                    }
                    Truth::Approx(tr::sqrt_iv(&d, p)?)
                }
            },
            UnaryOp::Cbrt => match a {
                Truth::Exact(q) => match (perfect_cube(q.numer()), perfect_cube(q.denom())) {
                    (Some(n), Some(d)) => Truth::Exact(Rational::new(n, d)),
                    _ => Truth::Approx(tr::cbrt_iv(&DInterval::from_rational(&q, p + 8), p)),
                },
                Truth::Approx(d) => Truth::Approx(tr::cbrt_iv(&d, p)),
            },
            UnaryOp::Exp => match a {
                Truth::Exact(q) if q.is_zero() => Truth::Exact(Rational::one()),
                a => Truth::Approx(tr::exp_iv(&a.enclosure(p + 8), p)?),
            },
            UnaryOp::Log => match a {
                Truth::Exact(q) if q.is_one() => Truth::Exact(Rational::zero()),
                Truth::Exact(q) if !q.is_positive() => return Err(self.domain("log")),
                Truth::Approx(d) if !d.hi.is_positive() => return Err(self.domain("log")),
                a => Truth::Approx(tr::log_iv(&a.enclosure(p + 8), p)?),
            },
            UnaryOp::Sin => match a {
                Truth::Exact(q) if q.is_zero() => Truth::Exact(q),
                a => Truth::Approx(tr::sin_iv(&a.enclosure(p + 8), p)),
            },
            UnaryOp::Cos => match a {
                Truth::Exact(q) if q.is_zero() => Truth::Exact(Rational::one()),
                a => Truth::Approx(tr::cos_iv(&a.enclosure(p + 8), p)),
            },
            UnaryOp::Tan => match a {
                Truth::Exact(q) if q.is_zero() => Truth::Exact(q),
                a => {
                    let x = a.enclosure(p + 8);
                    let s = tr::sin_iv(&x, p + 8);
                    let c = tr::cos_iv(&x, p + 8);
                    Truth::Approx(s.div(&c, p).ok_or(Fail::Undecided)?)
                }
            },
        })
    }

    fn binary(&mut self, op: BinaryOp, a: Truth, b: Truth) -> Result<Truth, Fail> {
        let p = self.prec;
        if let (Truth::Exact(x), Truth::Exact(y)) = (&a, &b) {
            match op {
                BinaryOp::Add => return Ok(self.exact_or_demote(x + y)),
                BinaryOp::Sub => return Ok(self.exact_or_demote(x - y)),
                BinaryOp::Mul => return Ok(self.exact_or_demote(x * y)),
                BinaryOp::Div => {
                    if y.is_zero() {
                        return Err(self.domain("div"));
                    }
                    return Ok(self.exact_or_demote(x / y));
                }
                BinaryOp::Pow => {}
            }
        }
        match op {
            BinaryOp::Add => Ok(Truth::Approx(a.enclosure(p).add(&b.enclosure(p), p))),
            BinaryOp::Sub => Ok(Truth::Approx(a.enclosure(p).sub(&b.enclosure(p), p))),
            BinaryOp::Mul => Ok(Truth::Approx(a.enclosure(p).mul(&b.enclosure(p), p))),
            BinaryOp::Div => {
                if let Truth::Exact(y) = &b {
                    if y.is_zero() {
                        return Err(self.domain("div"));
                    }
                }
                let d = b.enclosure(p);
                a.enclosure(p).div(&d, p).map(Truth::Approx).ok_or(Fail::Undecided)
            }
            BinaryOp::Pow => self.pow(a, b),
        }
    }

    fn pow(&mut self, a: Truth, b: Truth) -> Result<Truth, Fail> {
        let p = self.prec;
        if let Truth::Exact(y) = &b {
            if y.is_integer() {
                let n = y.to_integer();
                let k = n.abs().to_u64().filter(|k| *k <= MAX_INT_POW).ok_or_else(|| Fail::Unsupported("integer power exponent too large".into()))?;
                return match a {
                    Truth::Exact(x) => {
                        if n.is_negative() && x.is_zero() {
                            return Err(self.domain("pow"));
                        }
                        if rational_bits(&x).saturating_mul(k) > EXACT_BITS_LIMIT {
                            return self.pow(Truth::Approx(DInterval::from_rational(&x, p)), b.clone());
                        }
                        let v = num_traits::pow(x, k as usize);
                        Ok(Truth::Exact(if n.is_negative() { v.recip() } else { v }))
                    }
                    Truth::Approx(d) => {
                        let v = d.pow_u(k as u32, p);
                        if n.is_negative() {
                            DInterval::one().div(&v, p).map(Truth::Approx).ok_or(Fail::Undecided)
                        } else {
                            Ok(Truth::Approx(v))
                        }
                    }
                };
            }
        }
        // general real power x^y = exp(y log x), defined for x > 0 (and 0 when y > 0)
        if let Truth::Exact(x) = &a {
            if x.is_zero() {
                let y = b.enclosure(p);
                if y.lo.is_positive() {
                    return Ok(Truth::Exact(Rational::zero()));
                }
                if !y.hi.is_positive() {
                    return Err(self.domain("pow"));
                }
                return Err(Fail::Undecided);
            }
            if x.is_negative() {
                return Err(self.domain("pow"));
            }
        }
        let x = a.enclosure(p + 8);
        if x.hi.is_negative() {
            return Err(self.domain("pow"));
        }
        if !x.lo.is_positive() {
            return Err(Fail::Undecided);
        }
        let l = tr::log_iv(&x, p + 8)?;
        let e = b.enclosure(p + 8).mul(&l, p + 8);
        Ok(Truth::Approx(tr::exp_iv(&e, p)?))
    }
}

fn width_ok(d: &DInterval, target_bits: u32) -> bool {
    let w = d.width();
    let scale = Dyadic::max(&d.max_abs(), &Dyadic::one());
    w.ldexp(target_bits as i64) < scale
}

fn in_exponent_range(d: &DInterval) -> bool {
    [&d.lo, &d.hi].iter().all(|x| x.is_zero() || x.top_exp().abs() < EXPONENT_LIMIT)
}

/// Evaluates `expr` at a point, refining precision until the enclosure is
/// narrower than `2^-target_bits * max(1, |v|)` or the cap is hit. The final
/// enclosure is returned flagged inconclusive when the cap is hit.
pub fn eval_truth<'a>(
    expr: &'a Expr,
    point: &[(&'a str, Truth)],
    target_bits: u32,
) -> Result<(Truth, bool, u32), RealError> {
    let mut prec = START_PRECISION.max(target_bits + 16);
    let mut last: Option<(Truth, u32)> = None;
    loop {
        let mut ev = Evaluator { prec, env: point.to_vec(), path: Vec::new() };
        match ev.eval(expr) {
            Ok(Truth::Exact(q)) => return Ok((Truth::Exact(q), true, prec)),
            Ok(Truth::Approx(d)) => {
                if !in_exponent_range(&d) {
                    return Err(RealError::OutOfRange);
                }
                if width_ok(&d, target_bits) {
                    return Ok((Truth::Approx(d), true, prec));
                }
                last = Some((Truth::Approx(d), prec));
            }
            Err(Fail::Domain(op, path)) => return Err(RealError::Domain { op, path: ExprPath(path) }),
            Err(Fail::Undecided) => {}
            Err(Fail::OutOfRange) => return Err(RealError::OutOfRange),
            Err(Fail::Unbound(v)) => return Err(RealError::Unbound(v)),
            Err(Fail::Unsupported(s)) => return Err(RealError::Unsupported(s)),
        }
        if prec >= MAX_PRECISION {
            return match last {
                Some((t, p)) => Ok((t, false, p)),
                None => Err(RealError::Unresolved),
            };
        }
        prec = (prec * 2).min(MAX_PRECISION);
    }
}

/// Enclosure of the real value of `expr` at an exact point.
pub fn eval_real(expr: &Expr, point: &BTreeMap<String, Rational>, target_width_bits: u32) -> Result<RealValue, RealError> {
    let env: Vec<(&str, Truth)> = point.iter().map(|(k, v)| (k.as_str(), Truth::Exact(v.clone()))).collect();
    let (t, conclusive, precision_bits) = eval_truth(expr, &env, target_width_bits)?;
    let enclosure = match t {
        Truth::Exact(q) => Interval::point(q),
        Truth::Approx(d) => Interval::from_dinterval(&d),
    };
    Ok(RealValue { enclosure, conclusive, precision_bits })
}

/// Correctly rounded binary64 value of `expr` at a binary64 point, with the
/// enclosure it was derived from.
pub fn correctly_rounded(expr: &Expr, vars: &[String], point: &[f64]) -> Result<(f64, Truth), RealError> {
    let env: Vec<(&str, Truth)> = vars
        .iter()
        .zip(point)
        .map(|(v, x)| (v.as_str(), Truth::Exact(super::float::f64_to_rational(*x).expect("finite sample"))))
        .collect();
    let mut target = START_PRECISION - 16;
    loop {
        let (t, conclusive, prec) = eval_truth(expr, &env, target)?;
        match &t {
            Truth::Exact(q) => return Ok((super::float::round_nearest(q), t)),
            Truth::Approx(d) => {
                let (lo, hi) = (d.lo.to_f64(), d.hi.to_f64());
                if lo == hi {
                    return Ok((lo, t));
                }
                if !conclusive || prec >= MAX_PRECISION {
                    return Err(RealError::Unresolved);
                }
            }
        }
        target = (prec * 2).min(MAX_PRECISION) - 16;
    }
}

/// Compares the real value of `lhs` against `rhs` at a point, for branch
/// decisions in callers that evaluate comparisons themselves.
pub fn decide(op: CmpOp, lhs: &Expr, rhs: &Expr, point: &BTreeMap<String, Rational>) -> Result<bool, RealError> {
    let diff = Expr::binary(BinaryOp::Sub, lhs.clone(), rhs.clone());
    let v = eval_real(&diff, point, 64)?;
    let z = Rational::zero();
    let ord = if v.enclosure.lo() > &z {
        std::cmp::Ordering::Greater
    } else if v.enclosure.hi() < &z {
        std::cmp::Ordering::Less
    } else if v.enclosure.lo() == v.enclosure.hi() {
        std::cmp::Ordering::Equal
    } else {
        return Err(RealError::Unresolved);
    };
    Ok(op.holds(ord))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpcore::parse_expr;
    use crate::numeric::{f64_to_rational, pow2};

    fn pt(pairs: &[(&str, Rational)]) -> BTreeMap<String, Rational> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn third() -> Rational {
        Rational::new(1.into(), 3.into())
    }

    #[test]
    fn exact_arithmetic_has_zero_width() {
        let e = parse_expr("(+ x 1)").unwrap();
        let v = eval_real(&e, &pt(&[("x", third())]), 200).unwrap();
        assert_eq!(v.enclosure, Interval::point(Rational::new(4.into(), 3.into())));
        assert!(v.conclusive);
    }

    #[test]
    fn sqrt_two_is_narrow() {
        let e = parse_expr("(sqrt 2)").unwrap();
        let v = eval_real(&e, &BTreeMap::new(), 64).unwrap();
        assert!(v.enclosure.width() < pow2(-64));
        let s = f64_to_rational(std::f64::consts::SQRT_2).unwrap();
        assert!((v.enclosure.lo() - &s).abs() < pow2(-52));
    }

    #[test]
    fn domain_violation_is_distinct() {
        let e = parse_expr("(sqrt (- x 2))").unwrap();
        let err = eval_real(&e, &pt(&[("x", Rational::one())]), 64).unwrap_err();
        assert_eq!(err, RealError::Domain { op: "sqrt", path: ExprPath(vec![]) });
        let e = parse_expr("(/ 1 (- x 1))").unwrap();
        assert!(matches!(eval_real(&e, &pt(&[("x", Rational::one())]), 64), Err(RealError::Domain { op: "div", .. })));
    }

    #[test]
    fn cancellation_is_resolved() {
        // (x + 1e-30) - x has the exact value 1e-30 despite huge cancellation
        let e = parse_expr("(- (exp (+ x 1e-30)) (exp x))").unwrap();
        let v = eval_real(&e, &pt(&[("x", Rational::one())]), 30).unwrap();
        assert!(v.conclusive);
        let approx = crate::numeric::format::approx_f64(v.enclosure.lo());
        assert!((approx / (std::f64::consts::E * 1e-30) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn correctly_rounded_matches_exact_rounding() {
        let e = parse_expr("(/ x 3)").unwrap();
        let (v, _) = correctly_rounded(&e, &["x".into()], &[1.0]).unwrap();
        assert_eq!(v.to_bits(), 0x3FD5555555555555);
        let e = parse_expr("(sqrt x)").unwrap();
        let (v, _) = correctly_rounded(&e, &["x".into()], &[2.0]).unwrap();
        assert_eq!(v, 2f64.sqrt());
    }

    #[test]
    fn branches_follow_exact_comparison() {
        let e = parse_expr("(if (< x 1) (- x) x)").unwrap();
        let v = eval_real(&e, &pt(&[("x", third())]), 64).unwrap();
        assert_eq!(v.enclosure, Interval::point(-third()));
        assert!(decide(CmpOp::Lt, &Expr::var("x"), &Expr::int(1), &pt(&[("x", third())])).unwrap());
    }

    #[test]
    fn huge_exponentials_are_out_of_range_not_hangs() {
        let e = parse_expr("(exp x)").unwrap();
        let r = eval_real(&e, &pt(&[("x", Rational::from_integer(10_000_000_000i64.into()))]), 64);
        assert_eq!(r.unwrap_err(), RealError::OutOfRange);
    }
}
