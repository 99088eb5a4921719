//! Closed intervals with exact rational endpoints.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::dinterval::DInterval;
use super::transcendental::{self, TranscError};
use super::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IntervalError {
    #[error("interval bounds inverted: {lo} > {hi}")]
    Inverted { lo: Rational, hi: Rational },
    #[error("division by an interval containing zero")]
    DivisionByZero,
    #[error("{op} argument outside its domain")]
    Domain { op: &'static str },
    #[error("{op} result out of the supported range")]
    OutOfRange { op: &'static str },
}

/// Transcendental operators supported by [`Interval::transcendental`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranscOp {
    Sqrt,
    Cbrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl TranscOp {
    pub fn name(self) -> &'static str {
        match self {
            TranscOp::Sqrt => "sqrt",
            TranscOp::Cbrt => "cbrt",
            TranscOp::Exp => "exp",
            TranscOp::Log => "log",
            TranscOp::Sin => "sin",
            TranscOp::Cos => "cos",
        }
    }
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, IntervalError> {
        if lo > hi {
            return Err(IntervalError::Inverted { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(x: Rational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn from_ints(lo: i64, hi: i64) -> Result<Self, IntervalError> {
        Interval::new(Rational::from_integer(lo.into()), Rational::from_integer(hi.into()))
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn max_abs(&self) -> Rational {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.clone().min(other.lo.clone()), hi: self.hi.clone().max(other.hi.clone()) }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        Interval { lo: &self.lo - &o.hi, hi: &self.hi - &o.lo }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -&self.hi, hi: -&self.lo }
    }

    pub fn fabs(&self) -> Interval {
        if self.contains_zero() {
            Interval { lo: Rational::zero(), hi: self.max_abs() }
        } else if self.lo.is_positive() {
            self.clone()
        } else {
            self.neg()
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let ps = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let lo = ps.iter().min().expect("nonempty").clone();
        let hi = ps.iter().max().expect("nonempty").clone();
        Interval { lo, hi }
    }

    pub fn div(&self, o: &Interval) -> Result<Interval, IntervalError> {
        if o.contains_zero() {
            return Err(IntervalError::DivisionByZero);
        }
        let inv = Interval { lo: o.hi.recip(), hi: o.lo.recip() };
        Ok(self.mul(&inv))
    }

    /// Integer power; even powers of a zero-straddling interval start at 0.
    pub fn pow_int(&self, n: i64) -> Result<Interval, IntervalError> {
        if n == 0 {
            return Ok(Interval::point(Rational::one()));
        }
        let k = n.unsigned_abs() as i32;
        let base = if k % 2 == 0 { self.fabs() } else { self.clone() };
        let p = Interval { lo: num_traits::pow(base.lo.clone(), k as usize), hi: num_traits::pow(base.hi.clone(), k as usize) };
        if n < 0 {
            Interval::point(Rational::one()).div(&p)
        } else {
            Ok(p)
        }
    }

    /// Outward enclosure of a transcendental image at `precision_bits`.
    ///
    /// The result is at most `2^(1-p) * max(1, |endpoints|)` wider than the
    /// true image.
    pub fn transcendental(&self, op: TranscOp, precision_bits: u32) -> Result<Interval, IntervalError> {
        let w = precision_bits + 16;
        let a = DInterval::from_rationals(&self.lo, &self.hi, w + 8);
        let map = |e: TranscError| match e {
            TranscError::Domain => IntervalError::Domain { op: op.name() },
            TranscError::OutOfRange => IntervalError::OutOfRange { op: op.name() },
        };
        if matches!(op, TranscOp::Sqrt) && self.lo.is_negative() {
            return Err(IntervalError::Domain { op: "sqrt" });
        }
        if matches!(op, TranscOp::Log) && !self.lo.is_positive() {
            return Err(IntervalError::Domain { op: "log" });
        }
        let r = match op {
            TranscOp::Sqrt => transcendental::sqrt_iv(&a, w).map_err(map)?,
            TranscOp::Cbrt => transcendental::cbrt_iv(&a, w),
            TranscOp::Exp => transcendental::exp_iv(&a, w).map_err(map)?,
            TranscOp::Log => transcendental::log_iv(&a, w).map_err(map)?,
            TranscOp::Sin => transcendental::sin_iv(&a, w),
            TranscOp::Cos => transcendental::cos_iv(&a, w),
        };
        let r = r.round_out(precision_bits + 2);
        let (lo, hi) = r.to_rationals();
        Ok(Interval { lo, hi })
    }

    pub fn to_dinterval(&self, prec: u32) -> DInterval {
        DInterval::from_rationals(&self.lo, &self.hi, prec)
    }

    pub fn from_dinterval(d: &DInterval) -> Interval {
        let (lo, hi) = d.to_rationals();
        Interval { lo, hi }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}, {}]",
            super::format::fpcore_number(&self.lo),
            super::format::fpcore_number(&self.hi)
        )
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: super::ExactRational,
    hi: super::ExactRational,
}

impl Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IntervalRepr { lo: super::ExactRational(self.lo.clone()), hi: super::ExactRational(self.hi.clone()) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = IntervalRepr::deserialize(d)?;
        Interval::new(r.lo.0, r.hi.0).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::float::f64_to_rational;
    use num_bigint::BigInt;

    fn iv(lo: i64, hi: i64) -> Interval {
        Interval::from_ints(lo, hi).unwrap()
    }

    fn r(x: f64) -> Rational {
        f64_to_rational(x).unwrap()
    }

    #[test]
    fn exact_arithmetic() {
        assert_eq!(iv(1, 2).mul(&iv(-3, 4)), iv(-6, 8));
        assert_eq!(iv(-2, 3).pow_int(2).unwrap(), iv(0, 9));
        assert_eq!(iv(1, 2).div(&iv(-1, 1)), Err(IntervalError::DivisionByZero));
        assert_eq!(iv(1, 2).add(&iv(3, 4)), iv(4, 6));
        assert_eq!(iv(1, 2).sub(&iv(3, 4)), iv(-3, -1));
        assert_eq!(iv(-3, 2).fabs(), iv(0, 3));
        assert_eq!(iv(2, 4).pow_int(-1).unwrap(), Interval::new(r(0.25), r(0.5)).unwrap());
        assert!(Interval::from_ints(2, 1).is_err());
    }

    #[test]
    fn sqrt_of_perfect_squares_is_exact() {
        assert_eq!(iv(4, 9).transcendental(TranscOp::Sqrt, 128).unwrap(), iv(2, 3));
    }

    #[test]
    fn exp_of_unit_interval_is_tight() {
        let e = iv(0, 1).transcendental(TranscOp::Exp, 128).unwrap();
        assert_eq!(e.lo(), &Rational::one());
        // truncated decimal expansion of e, so a strict lower bound
        let e_lower = Rational::new(
            "27182818284590452353602874713526624977572470936999".parse::<BigInt>().unwrap(),
            num_traits::pow(BigInt::from(10), 49),
        );
        let two_m100 = Rational::new(BigInt::one(), BigInt::one() << 100u32);
        assert!(e.hi() > &e_lower);
        assert!(e.hi() - &e_lower < two_m100);
    }

    #[test]
    fn sine_over_wide_interval() {
        let s = iv(0, 4).transcendental(TranscOp::Sin, 128).unwrap();
        assert_eq!(s.hi(), &Rational::one());
        assert!(s.lo() <= &r(-0.7568));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(iv(-1, 1).transcendental(TranscOp::Sqrt, 64), Err(IntervalError::Domain { .. })));
        assert!(matches!(iv(0, 1).transcendental(TranscOp::Log, 64), Err(IntervalError::Domain { .. })));
        assert!(iv(-8, -1).transcendental(TranscOp::Cbrt, 64).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_interval() -> impl Strategy<Value = Interval> {
            (-50.0f64..50.0, 0.0f64..20.0).prop_map(|(a, w)| Interval::new(r(a), r(a + w)).unwrap())
        }

        fn ops() -> impl Strategy<Value = TranscOp> {
            prop_oneof![
                Just(TranscOp::Sqrt),
                Just(TranscOp::Cbrt),
                Just(TranscOp::Exp),
                Just(TranscOp::Log),
                Just(TranscOp::Sin),
                Just(TranscOp::Cos)
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn precision_refinement_is_nested(a in arb_interval(), op in ops(), p in 53u32..200) {
                let coarse = a.transcendental(op, p);
                let fine = a.transcendental(op, p + 64);
                match (coarse, fine) {
                    (Ok(c), Ok(f)) => prop_assert!(f.is_subset_of(&c), "{f} not in {c}"),
                    (Err(_), Err(_)) => {}
                    (c, f) => prop_assert!(false, "mismatch {c:?} {f:?}"),
                }
            }

            #[test]
            fn inclusion_monotone(a in arb_interval(), t in 0.0f64..1.0, op in ops()) {
                let w = a.width();
                let sub_lo = a.lo() + &w * r(t) / Rational::from_integer(2.into());
                let sub = Interval::new(sub_lo.clone(), sub_lo + &w / Rational::from_integer(3.into())).unwrap();
                if let (Ok(big), Ok(small)) = (a.transcendental(op, 128), sub.transcendental(op, 128)) {
                    prop_assert!(small.is_subset_of(&big), "{small} not in {big}");
                }
                let b = arb_pair(&a);
                let sb = arb_pair(&sub);
                prop_assert!(sub.mul(&sb).is_subset_of(&a.mul(&b)));
                prop_assert!(sub.add(&sb).is_subset_of(&a.add(&b)));
            }

            #[test]
            fn transcendental_contains_libm_values(x in -30.0f64..30.0, op in ops()) {
                let a = Interval::point(r(x));
                let libm = match op {
                    TranscOp::Sqrt => x.sqrt(),
                    TranscOp::Cbrt => x.cbrt(),
                    TranscOp::Exp => x.exp(),
                    TranscOp::Log => x.ln(),
                    TranscOp::Sin => x.sin(),
                    TranscOp::Cos => x.cos(),
                };
                match a.transcendental(op, 128) {
                    Ok(v) => {
                        let tol = r(libm.abs() * 3e-16 + 1e-300);
                        let lib = r(libm);
                        prop_assert!(v.lo() - &tol <= lib && lib <= v.hi() + &tol);
                    }
                    Err(_) => prop_assert!(libm.is_nan() || libm.is_infinite()),
                }
            }
        }

        fn arb_pair(a: &Interval) -> Interval {
            a.neg().add(&Interval::point(Rational::one()))
        }
    }
}
