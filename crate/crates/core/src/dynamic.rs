//! Sampled accuracy measurement: binary64 evaluation at seeded inputs scored
//! in bits of error against the correctly rounded real result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::int_exponent;
use crate::deadline::{Deadline, TimedOut};
use crate::fpcore::{BinaryOp, Expr, FpCoreProgram, Precondition, UnaryOp};
use crate::numeric::real::{correctly_rounded, eval_truth, Truth};
use crate::numeric::{f64_to_rational, from_ordinal, Interval, ordinal_of, round_down, round_nearest, round_up, ulps_between, ExactRational, RealError, Rational};

pub const DEFAULT_SAMPLES: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    #[default]
    OrdinalUniform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n: usize,
    pub strategy: SampleStrategy,
    pub seed: u64,
}

impl SamplePlan {
    pub fn new(n: usize, seed: u64) -> Self {
        SamplePlan { n, strategy: SampleStrategy::OrdinalUniform, seed }
    }
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan::new(DEFAULT_SAMPLES, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledError {
    pub avg_bits: f64,
    #[serde(with = "exact")]
    pub max_abs: Rational,
    pub n_total: usize,
    pub n_valid: usize,
    pub n_inconclusive: usize,
    pub n_invalid: usize,
    pub seed: u64,
}

mod exact {
    use super::{ExactRational, Rational};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        ExactRational(q.clone()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        Ok(ExactRational::deserialize(d)?.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DynamicError {
    #[error("program '{0}' has no precondition")]
    MissingPrecondition(String),
    #[error("range of {0} contains no binary64 value")]
    EmptyRange(String),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("no valid samples ({n_invalid} invalid, {n_inconclusive} inconclusive of {n_total})")]
    NoValidSamples { n_total: usize, n_invalid: usize, n_inconclusive: usize },
}

/// Seeded points, one value per variable in `vars` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub vars: Vec<String>,
    pub points: Vec<Vec<f64>>,
}

/// Draws each variable uniformly over the ordinals of the binary64 values in
/// its range. Variables are drawn in range order within each point.
pub fn sample_inputs(precond: &Precondition, plan: &SamplePlan) -> Result<Samples, DynamicError> {
    if plan.n == 0 {
        return Err(DynamicError::NoSamples);
    }
    let mut bounds = Vec::new();
    for (v, r) in precond.ranges() {
        let (lo, hi) = (round_up(r.lo()), round_down(r.hi()));
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(DynamicError::EmptyRange(v.clone()));
        }
        bounds.push((ordinal_of(lo).expect("finite"), ordinal_of(hi).expect("finite")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let points = (0..plan.n)
        .map(|_| bounds.iter().map(|&(a, b)| from_ordinal(rng.gen_range(a..=b))).collect())
        .collect();
    Ok(Samples { vars: precond.ranges().iter().map(|(v, _)| v.clone()).collect(), points })
}

/// Binary64 result with a flag cleared when NaN or an infinity appeared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F64Value {
    pub value: f64,
    pub valid: bool,
}

struct F64Eval<'a> {
    env: Vec<(&'a str, f64)>,
    valid: bool,
}

impl<'a> F64Eval<'a> {
    fn note(&mut self, x: f64) -> f64 {
        if !x.is_finite() {
            self.valid = false;
        }
        x
    }

    fn eval(&mut self, e: &'a Expr) -> f64 {
        let x = match e {
            Expr::Const(q) => round_nearest(q),
            Expr::Var(v) => self.env.iter().rev().find(|(n, _)| n == v).map_or(f64::NAN, |(_, x)| *x),
            Expr::Unary(op, a) => {
                let a = self.eval(a);
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Fabs => a.abs(),
                    UnaryOp::Sqrt => a.sqrt(),
                    UnaryOp::Cbrt => a.cbrt(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log => a.ln(),
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Tan => a.tan(),
                }
            }
            Expr::Binary(BinaryOp::Pow, a, b) => {
                let base = self.eval(a);
                match int_exponent(b) {
                    // left fold matching the analyzed evaluation order
                    Some(n) => {
                        let mut acc = if n == 0 { 1.0 } else { base };
                        for _ in 1..n.unsigned_abs() {
                            acc = self.note(acc * base);
                        }
                        if n < 0 {
                            1.0 / acc
                        } else {
                            acc
                        }
                    }
                    None => base.powf(self.eval(b)),
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (self.eval(a), self.eval(b));
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                    BinaryOp::Pow => unreachable!("handled above"),
                }
            }
            Expr::Let(bindings, body) => {
                let vals: Vec<(&'a str, f64)> = bindings.iter().map(|(n, v)| (n.as_str(), self.eval(v))).collect();
                let mark = self.env.len();
                self.env.extend(vals);
                let r = self.eval(body);
                self.env.truncate(mark);
                r
            }
            Expr::If(c, t, f) => {
                let (l, r) = (self.eval(&c.lhs), self.eval(&c.rhs));
                match l.partial_cmp(&r) {
                    Some(ord) if c.op.holds(ord) => self.eval(t),
                    Some(_) => self.eval(f),
                    None => {
                        self.valid = false;
                        f64::NAN
                    }
                }
            }
        };
        self.note(x)
    }
}

/// Round-to-nearest binary64 evaluation; constants are rounded once.
pub fn eval_f64(expr: &Expr, vars: &[String], point: &[f64]) -> F64Value {
    let mut ev = F64Eval { env: vars.iter().map(String::as_str).zip(point.iter().copied()).collect(), valid: true };
    for &x in point {
        ev.note(x);
    }
    let value = ev.eval(expr);
    F64Value { value, valid: ev.valid }
}

/// Correctly rounded value at a point, or why none is available.
#[derive(Debug, Clone, PartialEq)]
pub enum Ideal {
    Value(f64, Truth),
    /// The real expression is undefined at the point.
    Invalid,
    /// The oracle could not decide within its precision cap.
    Inconclusive,
}

pub fn ideal_at(expr: &Expr, vars: &[String], point: &[f64]) -> Ideal {
    match correctly_rounded(expr, vars, point) {
        Ok((x, t)) => Ideal::Value(x, t),
        Err(RealError::Domain { .. }) => Ideal::Invalid,
        Err(_) => Ideal::Inconclusive,
    }
}

pub fn ideal_values(expr: &Expr, samples: &Samples) -> Vec<Ideal> {
    samples.points.par_iter().map(|p| ideal_at(expr, &samples.vars, p)).collect()
}

/// As [`ideal_values`], polling `deadline` before each point.
pub fn ideal_values_until(expr: &Expr, samples: &Samples, deadline: &Deadline) -> Result<Vec<Ideal>, TimedOut> {
    samples
        .points
        .par_iter()
        .map(|p| deadline.check().map(|_| ideal_at(expr, &samples.vars, p)))
        .collect()
}

/// Bits of error `log2(1 + ulps)` between two binary64 values.
pub fn bits_between(actual: f64, ideal: f64) -> f64 {
    match ulps_between(actual, ideal) {
        Ok(u) => (u as f64 + 1.0).log2(),
        Err(_) => 64.0,
    }
}

/// Upper bound on `|actual - exact|` at a point, from an enclosure of at
/// least 64 relative bits.
pub fn abs_error_upper(expr: &Expr, vars: &[String], point: &[f64], actual: f64) -> Result<Rational, RealError> {
    point_error(expr, vars, point, actual).map(|p| p.abs_err_upper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointError {
    /// Upper bound on `|actual - exact|`.
    pub abs_err_upper: Rational,
    /// Enclosure of the exact value.
    pub exact: Interval,
}

/// [`abs_error_upper`] together with the exact-value enclosure it came from.
pub fn point_error(expr: &Expr, vars: &[String], point: &[f64], actual: f64) -> Result<PointError, RealError> {
    let env: Vec<(&str, Truth)> = vars
        .iter()
        .zip(point)
        .map(|(v, x)| (v.as_str(), Truth::Exact(f64_to_rational(*x).expect("finite sample"))))
        .collect();
    let (t, _, _) = eval_truth(expr, &env, 64)?;
    let (lo, hi) = t.bounds();
    Ok(PointError { abs_err_upper: t.abs_err_upper(actual), exact: Interval::new(lo, hi).expect("ordered enclosure") })
}

enum PointScore {
    Valid { bits: f64, abs: Rational },
    Invalid,
    Inconclusive,
}

/// Scores `program` on a fresh seeded sample set.
pub fn measure_error(program: &FpCoreProgram, plan: &SamplePlan) -> Result<SampledError, DynamicError> {
    let pre = match &program.precondition {
        _ if program.args.is_empty() => Some(Precondition::new(Vec::new())),
        Some(p) => p.in_order(&program.args),
        None => None,
    }
    .ok_or_else(|| DynamicError::MissingPrecondition(program.name.clone()))?;
    let samples = sample_inputs(&pre, plan)?;
    measure_on(&program.body, &samples, plan.seed)
}

/// Scores `expr` on given samples; aggregation follows draw order.
pub fn measure_on(expr: &Expr, samples: &Samples, seed: u64) -> Result<SampledError, DynamicError> {
    let scores: Vec<PointScore> = samples
        .points
        .par_iter()
        .map(|p| {
            let actual = eval_f64(expr, &samples.vars, p);
            match ideal_at(expr, &samples.vars, p) {
                Ideal::Invalid => PointScore::Invalid,
                _ if !actual.valid => PointScore::Invalid,
                Ideal::Inconclusive => PointScore::Inconclusive,
                Ideal::Value(ideal, truth) => {
                    PointScore::Valid { bits: bits_between(actual.value, ideal), abs: truth.abs_err_upper(actual.value) }
                }
            }
        })
        .collect();
    let mut out = SampledError {
        avg_bits: 0.0,
        max_abs: Rational::from_integer(0.into()),
        n_total: scores.len(),
        n_valid: 0,
        n_inconclusive: 0,
        n_invalid: 0,
        seed,
    };
    let mut sum = 0.0;
    for s in scores {
        match s {
            PointScore::Valid { bits, abs } => {
                out.n_valid += 1;
                sum += bits;
                if abs > out.max_abs {
                    out.max_abs = abs;
                }
            }
            PointScore::Invalid => out.n_invalid += 1,
            PointScore::Inconclusive => out.n_inconclusive += 1,
        }
    }
    if out.n_valid == 0 {
        return Err(DynamicError::NoValidSamples {
            n_total: out.n_total,
            n_invalid: out.n_invalid,
            n_inconclusive: out.n_inconclusive,
        });
    }
    out.avg_bits = sum / out.n_valid as f64;
    Ok(out)
}
