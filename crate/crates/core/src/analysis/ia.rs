//! Forward interval analysis of real ranges, float ranges and error bounds.

use num_traits::{Signed, ToPrimitive};

use super::{argument_ranges, AlarmKind, AnalysisError, AnalysisOutcome, AnalysisParams, ErrorBound};
use crate::deadline::Deadline;
use crate::fpcore::{BinaryOp, Expr, ExprPath, FpCoreProgram, UnaryOp};
use crate::numeric::transcendental as tr;
use crate::numeric::{DInterval, Dyadic, Interval, Rational, Round};

/// Largest |n| analysed for `pow(x, n)`.
const MAX_POW_EXPONENT: i64 = 4096;
/// exp overflows binary64 above ln(DBL_MAX) ~ 709.7827.
const EXP_OVERFLOW_ARG: f64 = 709.78;

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub real: DInterval,
    pub float: DInterval,
    pub err: Dyadic,
}

impl Node {
    fn wide(&self) -> DInterval {
        self.real.hull(&self.float)
    }

    fn exact(v: DInterval) -> Node {
        Node { real: v.clone(), float: v, err: Dyadic::zero() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Stop {
    Alarm(AlarmKind, Vec<usize>),
    Timeout,
}

impl Stop {
    pub fn into_outcome(self) -> AnalysisOutcome {
        match self {
            Stop::Alarm(kind, path) => AnalysisOutcome::Alarm { kind, path: ExprPath(path) },
            Stop::Timeout => AnalysisOutcome::Timeout,
        }
    }
}

fn intersect_or(primary: DInterval, other: &DInterval) -> DInterval {
    primary.intersect(other).unwrap_or(primary)
}

/// Hull of the round-to-nearest images of the endpoints; `None` on overflow.
fn rn_hull(v: &DInterval) -> Option<DInterval> {
    let lo = Dyadic::from_f64(v.lo.to_f64())?;
    let hi = Dyadic::from_f64(v.hi.to_f64())?;
    Some(DInterval::new(lo, hi))
}

fn is_float_point(v: &DInterval) -> bool {
    v.is_point() && Dyadic::from_f64(v.lo.to_f64()).as_ref() == Some(&v.lo)
}

fn min3(a: Dyadic, b: Dyadic, c: Dyadic) -> Dyadic {
    Dyadic::min(&Dyadic::min(&a, &b), &c)
}

/// Rounding model and working precision.
pub(crate) struct Model {
    p: u32,
    u: Dyadic,
    d: Dyadic,
    lib_u: Dyadic,
    inputs_rounded: bool,
}

type Step = Result<Node, AlarmKind>;

impl Model {
    pub fn new(params: &AnalysisParams) -> Model {
        let p = params.precision_bits;
        Model {
            p,
            u: Dyadic::from_rational(&params.unit_roundoff, p, Round::Up),
            d: Dyadic::from_rational(&params.denormal_term, p, Round::Up),
            lib_u: Dyadic::from_rational(&(&params.unit_roundoff * &params.lib_factor), p, Round::Up),
            inputs_rounded: params.inputs_rounded,
        }
    }

    fn add(&self, a: &Dyadic, b: &Dyadic) -> Dyadic {
        a.add_round(b, self.p, Round::Up)
    }

    fn mul(&self, a: &Dyadic, b: &Dyadic) -> Dyadic {
        a.mul_round(b, self.p, Round::Up)
    }

    fn div(&self, a: &Dyadic, b: &Dyadic) -> Dyadic {
        a.div_round(b, self.p, Round::Up)
    }

    /// `u * maxAbs(v) + d`, or zero when `v` is a single binary64 value.
    fn rnd(&self, unit: &Dyadic, v: &DInterval) -> Dyadic {
        if is_float_point(v) {
            return Dyadic::zero();
        }
        self.add(&self.mul(unit, &v.max_abs()), &self.d)
    }

    pub fn input(&self, r: &DInterval) -> Step {
        if !self.inputs_rounded {
            return Ok(Node::exact(r.clone()));
        }
        let float = rn_hull(r).ok_or(AlarmKind::Overflow)?;
        Ok(Node { real: r.clone(), float, err: self.rnd(&self.u, r) })
    }

    pub fn constant(&self, q: &Rational) -> Step {
        let f = crate::numeric::round_nearest(q);
        let fd = Dyadic::from_f64(f).ok_or(AlarmKind::Overflow)?;
        let diff = (fd.to_rational() - q).abs();
        Ok(Node {
            real: DInterval::from_rational(q, self.p),
            float: DInterval::point(fd),
            err: Dyadic::from_rational(&diff, self.p, Round::Up),
        })
    }

    /// Correctly rounded operation: `img` encloses the exact operation applied
    /// to the float operands.
    fn finish_rounded(&self, real: DInterval, img: DInterval, e_prop: Dyadic) -> Step {
        let pre = intersect_or(img, &real.inflate(&e_prop, self.p));
        let f = rn_hull(&pre).ok_or(AlarmKind::Overflow)?;
        let err = self.add(&e_prop, &self.rnd(&self.u, &pre));
        let float = intersect_or(f, &real.inflate(&err, self.p));
        Ok(Node { real, float, err })
    }

    /// Library call within `lib_factor * u` relative error plus `d`.
    fn finish_lib(&self, real: DInterval, img: DInterval, e_prop: Dyadic) -> Step {
        let pre = intersect_or(img, &real.inflate(&e_prop, self.p));
        let lib_rnd = self.rnd(&self.lib_u, &pre);
        let err = self.add(&e_prop, &lib_rnd);
        let out = pre.inflate(&lib_rnd, self.p);
        if rn_hull(&out).is_none() {
            return Err(AlarmKind::Overflow);
        }
        let float = intersect_or(out, &real.inflate(&err, self.p));
        Ok(Node { real, float, err })
    }

    pub fn add_sub(&self, op: BinaryOp, l: &Node, r: &Node) -> Step {
        let p = self.p;
        let (real, img) = if op == BinaryOp::Add {
            (l.real.add(&r.real, p), l.float.add(&r.float, p))
        } else {
            (l.real.sub(&r.real, p), l.float.sub(&r.float, p))
        };
        self.finish_rounded(real, img, self.add(&l.err, &r.err))
    }

    pub fn mul_nodes(&self, l: &Node, r: &Node, same: bool) -> Step {
        let p = self.p;
        let (real, img) = if same {
            (l.real.sqr(p), l.float.sqr(p))
        } else {
            (l.real.mul(&r.real, p), l.float.mul(&r.float, p))
        };
        let (ml, mr) = (l.real.max_abs(), r.real.max_abs());
        let cross = self.mul(&ml, &r.err);
        let e1 = self.add(&self.add(&cross, &self.mul(&mr, &l.err)), &self.mul(&l.err, &r.err));
        let e2 = self.add(&cross, &self.mul(&r.float.max_abs(), &l.err));
        let e3 = self.add(&self.mul(&l.float.max_abs(), &r.err), &self.mul(&mr, &l.err));
        self.finish_rounded(real, img, min3(e1, e2, e3))
    }

    pub fn div_nodes(&self, l: &Node, r: &Node) -> Step {
        let p = self.p;
        if r.wide().contains_zero() {
            return Err(AlarmKind::Div0);
        }
        let real = l.real.div(&r.real, p).expect("divisor excludes zero");
        let img = l.float.div(&r.float, p).expect("divisor excludes zero");
        let (min_r, min_f) = (r.real.min_abs(), r.float.min_abs());
        let e_inv = if r.err.is_zero() {
            Dyadic::zero()
        } else {
            self.div(&r.err, &min_r.mul_round(&min_f, p, Round::Down))
        };
        let ml = l.real.max_abs();
        let inv_max = self.div(&Dyadic::one(), &min_r);
        let e1 = self.add(
            &self.add(&self.mul(&ml, &e_inv), &self.mul(&inv_max, &l.err)),
            &self.mul(&l.err, &e_inv),
        );
        let e2 = self.add(&self.div(&l.err, &min_f), &self.mul(&ml, &e_inv));
        self.finish_rounded(real, img, Dyadic::min(&e1, &e2))
    }

    pub fn unary(&self, op: UnaryOp, x: &Node) -> Step {
        let p = self.p;
        let w = x.wide();
        match op {
            UnaryOp::Neg => Ok(Node { real: x.real.neg(), float: x.float.neg(), err: x.err.clone() }),
            UnaryOp::Fabs => Ok(Node { real: x.real.abs(), float: x.float.abs(), err: x.err.clone() }),
            UnaryOp::Sqrt => {
                if w.lo.is_negative() {
                    return Err(AlarmKind::SqrtNeg);
                }
                let real = tr::sqrt_iv(&x.real, p).expect("non-negative");
                let img = tr::sqrt_iv(&x.float, p).expect("non-negative");
                let e_prop = if x.err.is_zero() {
                    Dyadic::zero()
                } else {
                    let root = x.err.sqrt_round(p, Round::Up);
                    let s = w.lo.sqrt_round(p, Round::Down).add_round(&x.real.lo.sqrt_round(p, Round::Down), p, Round::Down);
                    if s.is_positive() {
                        Dyadic::min(&self.div(&x.err, &s), &root)
                    } else {
                        root
                    }
                };
                self.finish_rounded(real, img, e_prop)
            }
            UnaryOp::Cbrt => {
                if w.contains_zero() {
                    return Err(AlarmKind::CbrtSingular);
                }
                let real = tr::cbrt_iv(&x.real, p);
                let img = tr::cbrt_iv(&x.float, p);
                let c = w.min_abs().cbrt_round(p, Round::Down);
                let denom = c.mul_round(&c, p, Round::Down).mul_round(&Dyadic::from_i64(3), p, Round::Down);
                self.finish_lib(real, img, self.div(&x.err, &denom))
            }
            UnaryOp::Exp => {
                let limit = Dyadic::from_f64(EXP_OVERFLOW_ARG).expect("finite");
                if w.hi > limit {
                    return Err(AlarmKind::Overflow);
                }
                let real = tr::exp_iv(&x.real, p).map_err(|_| AlarmKind::Overflow)?;
                let img = tr::exp_iv(&x.float, p).map_err(|_| AlarmKind::Overflow)?;
                let slope = Dyadic::max(&real.hi, &img.hi);
                let e_prop = self.mul(&slope, &x.err);
                self.finish_lib(real, img, e_prop)
            }
            UnaryOp::Log => {
                if !w.lo.is_positive() {
                    return Err(AlarmKind::LogDomain);
                }
                let real = tr::log_iv(&x.real, p).map_err(|_| AlarmKind::LogDomain)?;
                let img = tr::log_iv(&x.float, p).map_err(|_| AlarmKind::LogDomain)?;
                self.finish_lib(real, img, self.div(&x.err, &w.lo))
            }
            UnaryOp::Sin | UnaryOp::Cos => {
                let f = if op == UnaryOp::Sin { tr::sin_iv } else { tr::cos_iv };
                let real = f(&x.real, p);
                let img = f(&x.float, p);
                self.finish_lib(real, img, x.err.clone())
            }
            UnaryOp::Tan => Err(AlarmKind::FnUnsupported),
        }
    }

    /// Integer power as a left fold of multiplications.
    pub fn pow_int(&self, base: &Node, n: i64, deadline: &Deadline) -> Result<Node, Stop> {
        if n == 0 {
            return Ok(Node::exact(DInterval::one()));
        }
        let mut acc = base.clone();
        for i in 1..n.unsigned_abs() {
            deadline.check().map_err(|_| Stop::Timeout)?;
            acc = self.mul_nodes(&acc, base, i == 1).map_err(|k| Stop::Alarm(k, Vec::new()))?;
        }
        if n < 0 {
            acc = self.div_nodes(&Node::exact(DInterval::one()), &acc).map_err(|k| Stop::Alarm(k, Vec::new()))?;
        }
        Ok(acc)
    }
}

/// Integer exponent of a `pow` node, if it is a literal integer in range.
pub(crate) fn int_exponent(e: &Expr) -> Option<i64> {
    match e {
        Expr::Const(q) if q.is_integer() => q.to_integer().to_i64().filter(|n| n.abs() <= MAX_POW_EXPONENT),
        _ => None,
    }
}

struct Walker<'a, 'm> {
    model: &'m Model,
    deadline: &'m Deadline,
    env: Vec<(&'a str, Node)>,
    path: Vec<usize>,
}

impl<'a> Walker<'a, '_> {
    fn alarm(&self, kind: AlarmKind) -> Stop {
        Stop::Alarm(kind, self.path.clone())
    }

    fn child(&mut self, i: usize, e: &'a Expr) -> Result<Node, Stop> {
        self.path.push(i);
        let r = self.eval(e);
        self.path.pop();
        r
    }

    fn eval(&mut self, e: &'a Expr) -> Result<Node, Stop> {
        self.deadline.check().map_err(|_| Stop::Timeout)?;
        let m = self.model;
        match e {
            Expr::Const(q) => m.constant(q).map_err(|k| self.alarm(k)),
            Expr::Var(v) => Ok(self
                .env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, node)| node.clone())
                .expect("variables are bound by construction")),
            Expr::Unary(op, a) => {
                let x = self.child(0, a)?;
                m.unary(*op, &x).map_err(|k| self.alarm(k))
            }
            Expr::Binary(BinaryOp::Pow, a, b) => {
                let n = int_exponent(b).ok_or_else(|| self.alarm(AlarmKind::NonIntPow))?;
                let base = self.child(0, a)?;
                m.pow_int(&base, n, self.deadline).map_err(|s| match s {
                    Stop::Alarm(k, _) => self.alarm(k),
                    Stop::Timeout => Stop::Timeout,
                })
            }
            Expr::Binary(op, a, b) => {
                let l = self.child(0, a)?;
                if *op == BinaryOp::Sub && a == b {
                    // identical operands round identically
                    return Ok(Node::exact(DInterval::zero()));
                }
                let r = self.child(1, b)?;
                match op {
                    BinaryOp::Add | BinaryOp::Sub => m.add_sub(*op, &l, &r),
                    BinaryOp::Mul => m.mul_nodes(&l, &r, a == b),
                    BinaryOp::Div => m.div_nodes(&l, &r),
                    BinaryOp::Pow => unreachable!("handled above"),
                }
                .map_err(|k| self.alarm(k))
            }
            Expr::Let(bindings, body) => {
                let mut vals = Vec::with_capacity(bindings.len());
                for (i, (name, v)) in bindings.iter().enumerate() {
                    vals.push((name.as_str(), self.child(i, v)?));
                }
                let mark = self.env.len();
                self.env.extend(vals);
                let r = self.child(bindings.len(), body);
                self.env.truncate(mark);
                r
            }
            Expr::If(..) => Err(self.alarm(AlarmKind::CondUnsupported)),
        }
    }
}

/// Analyses `body` over one box of input ranges (in `args` order).
pub(crate) fn analyze_box(
    model: &Model,
    body: &Expr,
    args: &[String],
    ranges: &[DInterval],
    deadline: &Deadline,
) -> Result<Node, Stop> {
    let mut env = Vec::with_capacity(args.len());
    for (a, r) in args.iter().zip(ranges) {
        env.push((a.as_str(), model.input(r).map_err(|k| Stop::Alarm(k, Vec::new()))?));
    }
    let mut w = Walker { model, deadline, env, path: Vec::new() };
    w.eval(body)
}

pub(crate) fn outcome_of(node: &Node) -> AnalysisOutcome {
    AnalysisOutcome::Bound {
        error: ErrorBound { abs_err: node.err.to_rational() },
        range: Interval::from_dinterval(&node.real),
    }
}

pub fn analyze_ia(program: &FpCoreProgram, params: &AnalysisParams) -> Result<AnalysisOutcome, AnalysisError> {
    analyze_ia_with(program, params, &Deadline::from_budget(params.time_budget_ms))
}

pub fn analyze_ia_with(
    program: &FpCoreProgram,
    params: &AnalysisParams,
    deadline: &Deadline,
) -> Result<AnalysisOutcome, AnalysisError> {
    params.validate()?;
    let p = params.precision_bits;
    let ranges: Vec<DInterval> = argument_ranges(program)?.iter().map(|r| r.to_dinterval(p)).collect();
    let model = Model::new(params);
    Ok(match analyze_box(&model, &program.body, &program.args, &ranges, deadline) {
        Ok(node) => outcome_of(&node),
        Err(stop) => stop.into_outcome(),
    })
}

/// Hull of the real and binary64 ranges of `expr` over `ranges`, or `None`
/// when the analysis raises an alarm.
pub fn float_range(expr: &Expr, vars: &[String], ranges: &[Interval], params: &AnalysisParams) -> Option<Interval> {
    let model = Model::new(params);
    let boxes: Vec<DInterval> = ranges.iter().map(|r| r.to_dinterval(params.precision_bits)).collect();
    analyze_box(&model, expr, vars, &boxes, &Deadline::none())
        .ok()
        .map(|n| Interval::from_dinterval(&n.wide()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpcore::parse_fpcore;
    use crate::numeric::{f64_to_rational, pow2, rational};

    fn prog(src: &str) -> FpCoreProgram {
        parse_fpcore(src).unwrap().remove(0)
    }

    fn bound(src: &str, params: &AnalysisParams) -> Rational {
        analyze_ia(&prog(src), params).unwrap().bound().cloned().unwrap_or_else(|| panic!("no bound for {src}"))
    }

    fn alarm(src: &str) -> (AlarmKind, ExprPath) {
        match analyze_ia(&prog(src), &AnalysisParams::default()).unwrap() {
            AnalysisOutcome::Alarm { kind, path } => (kind, path),
            other => panic!("expected alarm for {src}, got {other:?}"),
        }
    }

    /// `exact <= got <= exact * (1 + 2^-120)`: outward rounding at 128 bits.
    fn assert_tight(got: &Rational, exact: &Rational) {
        assert!(got >= exact, "{got} < {exact}");
        assert!(got <= &(exact * (Rational::from_integer(1.into()) + pow2(-120))), "{got} too loose");
    }

    #[test]
    fn single_input_rounding() {
        let e = bound("(FPCore (x) :pre (<= 1 x 2) x)", &AnalysisParams::default());
        assert_tight(&e, &(pow2(-53) * Rational::from_integer(2.into()) + pow2(-1075)));
    }

    #[test]
    fn one_addition_without_input_rounding() {
        let params = AnalysisParams { inputs_rounded: false, ..AnalysisParams::default() };
        let e = bound("(FPCore (x y) :pre (and (<= 1 x 2) (<= 1 y 2)) (+ x y))", &params);
        assert_tight(&e, &(pow2(-53) * Rational::from_integer(4.into()) + pow2(-1075)));
    }

    #[test]
    fn alarms_carry_positions() {
        assert_eq!(alarm("(FPCore (x) :pre (<= 0 x 2) (/ 1 (- x 1)))"), (AlarmKind::Div0, ExprPath(vec![])));
        assert_eq!(alarm("(FPCore (x) :pre (<= -1 x 1) (+ 1 (sqrt x)))"), (AlarmKind::SqrtNeg, ExprPath(vec![1])));
        assert_eq!(alarm("(FPCore (x) :pre (<= 1 x 2) (pow x 0.5))").0, AlarmKind::NonIntPow);
        assert_eq!(alarm("(FPCore (x) :pre (<= 1 x 2) (if (< x 1.5) x 1))").0, AlarmKind::CondUnsupported);
        assert_eq!(alarm("(FPCore (x) :pre (<= 0 x 2) (log x))").0, AlarmKind::LogDomain);
        assert_eq!(alarm("(FPCore (x) :pre (<= -1 x 2) (cbrt x))").0, AlarmKind::CbrtSingular);
        assert_eq!(alarm("(FPCore (x) :pre (<= 1 x 2) (tan x))").0, AlarmKind::FnUnsupported);
        assert_eq!(alarm("(FPCore (x) :pre (<= 1 x 1000) (exp x))").0, AlarmKind::Overflow);
    }

    #[test]
    fn rounded_nonnegative_inputs_stay_in_sqrt_domain() {
        let e = bound("(FPCore (x) :pre (<= 0 x 1) (sqrt x))", &AnalysisParams::default());
        assert!(e > Rational::from_integer(0.into()));
    }

    #[test]
    fn identical_operands() {
        let params = AnalysisParams::default();
        assert_eq!(bound("(FPCore (x) :pre (<= 1 x 2) (- (* x 3) (* x 3)))", &params), Rational::from_integer(0.into()));
        match analyze_ia(&prog("(FPCore (x) :pre (<= -1 x 2) (* x x))"), &params).unwrap() {
            AnalysisOutcome::Bound { range, .. } => assert_eq!(range.lo(), &Rational::from_integer(0.into())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_constants_have_no_error() {
        let params = AnalysisParams::default();
        assert_eq!(bound("(FPCore () :pre (and) (+ 1 2))", &params), Rational::from_integer(0.into()));
        let tenth = bound("(FPCore () :pre (and) 0.1)", &params);
        assert_tight(&tenth, &(f64_to_rational(0.1).unwrap() - rational("0.1").unwrap()).abs());
    }

    #[test]
    fn pow_matches_explicit_products() {
        let params = AnalysisParams::default();
        let a = bound("(FPCore (x) :pre (<= -2 x 3) (pow x 3))", &params);
        let b = bound("(FPCore (x) :pre (<= -2 x 3) (* (* x x) x))", &params);
        assert_eq!(a, b);
        assert_eq!(alarm("(FPCore (x) :pre (<= -1 x 1) (+ 1 (pow x -2)))"), (AlarmKind::Div0, ExprPath(vec![1])));
    }

    #[test]
    fn timeout_is_reported() {
        let p = prog("(FPCore (x) :pre (<= 1 x 2) (+ x 1))");
        let out = analyze_ia_with(&p, &AnalysisParams::default(), &Deadline::after_ms(0)).unwrap();
        assert_eq!(out, AnalysisOutcome::Timeout);
    }

    #[test]
    fn missing_precondition_is_an_error() {
        let p = prog("(FPCore (x) (+ x 1))");
        assert!(matches!(analyze_ia(&p, &AnalysisParams::default()), Err(AnalysisError::MissingPrecondition(_))));
    }
}
