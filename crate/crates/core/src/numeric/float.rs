//! Binary64 rounding and ordinal arithmetic.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::Rational;

/// Smallest binary64 quantum exponent (subnormal spacing is 2^-1074).
const MIN_QUANTUM_EXP: i64 = -1074;
const MANT_BITS: u64 = 53;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FloatError {
    #[error("NaN has no ordinal")]
    NaN,
}

/// Rounds `mag * 2^exp` (plus a sticky remainder strictly between 0 and one unit
/// of `mag`'s last place when `sticky` is set) to nearest binary64, ties to even.
/// `mag` must carry at least two bits beyond the final rounding position whenever
/// `sticky` is set.
pub(crate) fn round_mag_to_f64(negative: bool, mag: &BigUint, exp: i64, sticky: bool) -> f64 {
    if mag.is_zero() {
        debug_assert!(!sticky);
        return if negative { -0.0 } else { 0.0 };
    }
    let bits = mag.bits() as i64;
    // value in [2^(top-1), 2^top)
    let top = bits + exp;
    let quantum = (top - MANT_BITS as i64).max(MIN_QUANTUM_EXP);
    let shift = quantum - exp;
    let mut m: BigUint;
    if shift <= 0 {
        m = mag << ((-shift) as u64);
        debug_assert!(!sticky || shift < 0);
        // exact unless sticky; sticky can only be below the last place, ignore
        // because caller guarantees extra bits when sticky is set
    } else {
        let s = shift as u64;
        m = mag >> s;
        let rem = mag - (&m << s);
        let half = BigUint::one() << (s - 1);
        let round_up = match rem.cmp(&half) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => sticky || m.is_odd(),
        };
        if round_up {
            m += 1u32;
        }
    }
    let mut q = quantum;
    if m.bits() > MANT_BITS {
        m >>= 1u32;
        q += 1;
    }
    compose_f64(negative, &m, q)
}

/// Builds `±m * 2^q` where `m < 2^53` and the value is representable or overflows.
fn compose_f64(negative: bool, m: &BigUint, q: i64) -> f64 {
    let mv: u64 = m.try_into().expect("mantissa fits in 64 bits");
    let sign_bit = if negative { 1u64 << 63 } else { 0 };
    if mv == 0 {
        return f64::from_bits(sign_bit);
    }
    let top = (64 - mv.leading_zeros() as i64) + q; // value in [2^(top-1), 2^top)
    if top > 1024 {
        return if negative { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let bits = if top - 1 < -1022 {
        // subnormal: q == -1074
        debug_assert_eq!(q, MIN_QUANTUM_EXP);
        mv
    } else {
        // normalize to 53-bit mantissa
        let lead = 64 - mv.leading_zeros() as i64;
        let norm = if lead < MANT_BITS as i64 {
            mv << (MANT_BITS as i64 - lead)
        } else {
            mv
        };
        let biased = (top - 1 + 1023) as u64;
        (biased << 52) | (norm & ((1u64 << 52) - 1))
    };
    f64::from_bits(sign_bit | bits)
}

/// Correctly rounded (ties-to-even) binary64 nearest to an exact rational.
/// Values at or beyond the overflow threshold map to ±∞; zero maps to +0.
pub fn round_nearest(q: &Rational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let negative = q.is_negative();
    let n = q.numer().magnitude().clone();
    let d = q.denom().magnitude().clone();
    // choose a scale so the integer quotient carries at least 55 bits
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let k = (MANT_BITS as i64 + 3) - (nb - db);
    // value = (num / den) * 2^-k
    let (num, den) = if k >= 0 { (n << (k as u64), d) } else { (n, d << ((-k) as u64)) };
    let exp = -k;
    let (quot, rem) = num.div_rem(&den);
    round_mag_to_f64(negative, &quot, exp, !rem.is_zero())
}

/// Exact rational value of a finite binary64.
pub fn f64_to_rational(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(Rational::zero());
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    };
    let mut num = BigInt::from(m);
    if negative {
        num = -num;
    }
    Some(if e >= 0 {
        Rational::from_integer(num << (e as u64))
    } else {
        Rational::new(num, BigInt::one() << ((-e) as u64))
    })
}

/// Monotone integer index of a binary64; -0 and +0 share ordinal 0.
pub fn ordinal_of(x: f64) -> Result<i64, FloatError> {
    if x.is_nan() {
        return Err(FloatError::NaN);
    }
    let bits = x.to_bits() as i64;
    Ok(if bits < 0 {
        -(bits & i64::MAX)
    } else {
        bits
    })
}

/// Inverse of [`ordinal_of`]; ordinal 0 maps to +0.
pub fn from_ordinal(o: i64) -> f64 {
    if o < 0 {
        f64::from_bits(((-o) as u64) | (1u64 << 63))
    } else {
        f64::from_bits(o as u64)
    }
}

/// Number of binary64 values strictly passed when walking from `a` to `b`.
pub fn ulps_between(a: f64, b: f64) -> Result<u64, FloatError> {
    let oa = ordinal_of(a)? as i128;
    let ob = ordinal_of(b)? as i128;
    Ok((oa - ob).unsigned_abs() as u64)
}

/// Smallest binary64 that is >= q (may be +∞).
pub fn round_up(q: &Rational) -> f64 {
    let x = round_nearest(q);
    match f64_to_rational(x) {
        Some(v) if &v < q => next_up(x),
        _ => x,
    }
}

/// Largest binary64 that is <= q (may be -∞).
pub fn round_down(q: &Rational) -> f64 {
    let x = round_nearest(q);
    match f64_to_rational(x) {
        Some(v) if &v > q => next_down(x),
        _ => x,
    }
}

pub fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    from_ordinal(ordinal_of(x).expect("not NaN") + 1)
}

pub fn next_down(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return x;
    }
    from_ordinal(ordinal_of(x).expect("not NaN") - 1)
}

pub(crate) fn bigint_from_parts(negative: bool, mag: BigUint) -> BigInt {
    BigInt::from_biguint(if negative { Sign::Minus } else { Sign::Plus }, mag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn one_third_rounds_to_known_bits() {
        assert_eq!(round_nearest(&r(1, 3)).to_bits(), 0x3FD5555555555555);
    }

    #[test]
    fn overflow_and_zero() {
        let big = Rational::from_integer(BigInt::one() << 1024u32);
        assert_eq!(round_nearest(&big), f64::INFINITY);
        assert_eq!(round_nearest(&-big), f64::NEG_INFINITY);
        let z = round_nearest(&Rational::zero());
        assert_eq!(z.to_bits(), 0);
    }

    #[test]
    fn ties_go_to_even() {
        // 1 + 2^-53 is exactly halfway between 1 and 1 + 2^-52
        let half = Rational::one() + Rational::new(BigInt::one(), BigInt::one() << 53u32);
        assert_eq!(round_nearest(&half), 1.0);
        let three_half = Rational::one() + r(3, 1) * Rational::new(BigInt::one(), BigInt::one() << 53u32);
        assert_eq!(round_nearest(&three_half), 1.0 + 2.0 * f64::EPSILON);
    }

    #[test]
    fn subnormals_round_trip() {
        for x in [5e-324, 1e-310, -2.5e-320, f64::MIN_POSITIVE, f64::MAX] {
            let q = f64_to_rational(x).unwrap();
            assert_eq!(round_nearest(&q), x);
        }
        // half of the smallest subnormal ties to zero (even)
        let tiny = Rational::new(BigInt::one(), BigInt::one() << 1075u32);
        assert_eq!(round_nearest(&tiny), 0.0);
    }

    #[test]
    fn decimal_constants_match_parser() {
        for (n, d) in [(1, 10), (331_4, 10), (-7, 3), (12345, 1000)] {
            let q = r(n, d);
            assert_eq!(round_nearest(&q), n as f64 / d as f64);
        }
    }

    #[test]
    fn ordinals() {
        assert_eq!(ordinal_of(-0.0).unwrap(), ordinal_of(0.0).unwrap());
        assert_eq!(ulps_between(1.0, 2.0).unwrap(), 1u64 << 52);
        assert!(ordinal_of(f64::NAN).is_err());
        assert!(ulps_between(f64::NAN, 1.0).is_err());
        assert_eq!(ulps_between(-5e-324, 5e-324).unwrap(), 2);
    }

    #[test]
    fn directed_rounding() {
        let tenth = r(1, 10);
        assert!(f64_to_rational(round_up(&tenth)).unwrap() >= tenth);
        assert!(f64_to_rational(round_down(&tenth)).unwrap() <= tenth);
        assert_eq!(next_up(round_down(&tenth)), round_up(&tenth));
        assert_eq!(round_up(&Rational::one()), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ordinal_is_monotone(a in any::<f64>(), b in any::<f64>()) {
                prop_assume!(!a.is_nan() && !b.is_nan());
                let (oa, ob) = (ordinal_of(a).unwrap(), ordinal_of(b).unwrap());
                if a < b { prop_assert!(oa < ob); }
                if a == b { prop_assert_eq!(oa, ob); }
            }

            #[test]
            fn exact_floats_round_to_themselves(x in any::<f64>()) {
                prop_assume!(x.is_finite());
                let q = f64_to_rational(x).unwrap();
                let back = round_nearest(&q);
                prop_assert!(back == x);
            }

            #[test]
            fn rounding_matches_hardware_division(n in -1_000_000i64..1_000_000, d in 1i64..1_000_000) {
                // both operands exact in binary64, so IEEE division is correctly rounded
                let q = r(n, d);
                let expect = n as f64 / d as f64;
                prop_assert_eq!(round_nearest(&q).to_bits(), (expect + 0.0).to_bits());
            }
        }
    }
}
