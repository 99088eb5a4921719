//! Exact dyadic rationals `±mag * 2^exp` with directed rounding to a bit precision.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::float::{bigint_from_parts, round_mag_to_f64};
use super::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
    Nearest,
}

impl Round {
    pub fn flip(self) -> Round {
        match self {
            Round::Down => Round::Up,
            Round::Up => Round::Down,
            Round::Nearest => Round::Nearest,
        }
    }
}

/// Canonical form: `mag` odd (or zero with `exp == 0` and `neg == false`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    neg: bool,
    mag: BigUint,
    exp: i64,
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { neg: false, mag: BigUint::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic::from_i64(1)
    }

    pub fn from_parts(neg: bool, mag: BigUint, exp: i64) -> Self {
        let mut d = Dyadic { neg, mag, exp };
        d.normalize();
        d
    }

    pub fn from_i64(v: i64) -> Self {
        Dyadic::from_parts(v < 0, BigUint::from(v.unsigned_abs()), 0)
    }

    pub fn from_bigint(v: &BigInt) -> Self {
        Dyadic::from_parts(v.is_negative(), v.magnitude().clone(), 0)
    }

    /// `2^k`.
    pub fn pow2(k: i64) -> Self {
        Dyadic { neg: false, mag: BigUint::one(), exp: k }
    }

    /// Exact value of a finite binary64.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Dyadic::zero());
        }
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
        Some(Dyadic::from_parts(neg, BigUint::from(m), e))
    }

    fn normalize(&mut self) {
        if self.mag.is_zero() {
            self.neg = false;
            self.exp = 0;
            return;
        }
        if let Some(tz) = self.mag.trailing_zeros() {
            if tz > 0 {
                self.mag >>= tz;
                self.exp += tz as i64;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mag.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn is_positive(&self) -> bool {
        !self.neg && !self.mag.is_zero()
    }

    pub fn signum(&self) -> i32 {
        if self.is_zero() {
            0
        } else if self.neg {
            -1
        } else {
            1
        }
    }

    pub fn mantissa_bits(&self) -> u64 {
        self.mag.bits()
    }

    /// `t` with `2^(t-1) <= |self| < 2^t`; meaningless for zero.
    pub fn top_exp(&self) -> i64 {
        self.mag.bits() as i64 + self.exp
    }

    pub fn neg(&self) -> Self {
        let mut d = self.clone();
        if !d.is_zero() {
            d.neg = !d.neg;
        }
        d
    }

    pub fn abs(&self) -> Self {
        Dyadic { neg: false, mag: self.mag.clone(), exp: self.exp }
    }

    /// Multiplies by `2^k` exactly.
    pub fn ldexp(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic { neg: self.neg, mag: self.mag.clone(), exp: self.exp + k }
    }

    pub fn to_rational(&self) -> Rational {
        let n = bigint_from_parts(self.neg, self.mag.clone());
        if self.exp >= 0 {
            Rational::from_integer(n << (self.exp as u64))
        } else {
            Rational::new_raw(n, BigInt::one() << ((-self.exp) as u64))
        }
    }

    /// Correctly rounded binary64 (ties to even, overflow to ±∞).
    pub fn to_f64(&self) -> f64 {
        round_mag_to_f64(self.neg, &self.mag, self.exp, false)
    }

    /// Cheap approximate conversion for heuristics only.
    pub fn approx_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mag.bits();
        let (m, e) = if bits > 60 {
            let s = bits - 60;
            ((&self.mag >> s).to_f64().unwrap_or(0.0), self.exp + s as i64)
        } else {
            (self.mag.to_f64().unwrap_or(0.0), self.exp)
        };
        let v = m * 2f64.powi(e.clamp(-2000, 2000) as i32);
        if self.neg {
            -v
        } else {
            v
        }
    }

    /// Rounds to `prec` significant bits in direction `dir`.
    pub fn round(&self, prec: u32, dir: Round) -> Self {
        if self.mag.bits() <= prec as u64 {
            return self.clone();
        }
        round_parts(self.neg, &self.mag, self.exp, false, prec, dir)
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(other.exp);
        let a = bigint_from_parts(self.neg, self.mag.clone()) << ((self.exp - e) as u64);
        let b = bigint_from_parts(other.neg, other.mag.clone()) << ((other.exp - e) as u64);
        let s = a + b;
        Dyadic::from_parts(s.is_negative(), s.magnitude().clone(), e)
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        self.add(&other.neg())
    }

    /// `self + other` rounded to `prec` bits; avoids materializing huge
    /// exponent gaps.
    pub fn add_round(&self, other: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        if self.is_zero() {
            return other.round(prec, dir);
        }
        if other.is_zero() {
            return self.round(prec, dir);
        }
        let (big, small) = if self.top_exp() >= other.top_exp() { (self, other) } else { (other, self) };
        let gap_limit = big.top_exp() - prec as i64 - 4;
        if small.top_exp() < gap_limit && big.exp > small.top_exp() {
            // small only contributes a sticky bit below the rounding position
            let lsb = gap_limit.min(big.exp - 1);
            let proxy = Dyadic { neg: small.neg, mag: BigUint::one(), exp: lsb - 1 };
            return big.add(&proxy).round(prec, dir);
        }
        self.add(other).round(prec, dir)
    }

    pub fn sub_round(&self, other: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        self.add_round(&other.neg(), prec, dir)
    }

    pub fn mul(&self, other: &Dyadic) -> Dyadic {
        if self.is_zero() || other.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { neg: self.neg != other.neg, mag: &self.mag * &other.mag, exp: self.exp + other.exp }
    }

    pub fn mul_round(&self, other: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        self.mul(other).round(prec, dir)
    }

    /// `self / other` rounded to `prec` bits. Panics on division by zero.
    pub fn div_round(&self, other: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        assert!(!other.is_zero(), "dyadic division by zero");
        if self.is_zero() {
            return Dyadic::zero();
        }
        let neg = self.neg != other.neg;
        let k = (prec as i64 + 3 + other.mag.bits() as i64 - self.mag.bits() as i64).max(0);
        let num = &self.mag << (k as u64);
        let (q, r) = num.div_rem(&other.mag);
        round_parts(neg, &q, self.exp - other.exp - k, !r.is_zero(), prec, dir)
    }

    /// Square root rounded to `prec` bits. Requires `self >= 0`.
    pub fn sqrt_round(&self, prec: u32, dir: Round) -> Dyadic {
        assert!(!self.neg, "sqrt of negative dyadic");
        if self.is_zero() {
            return Dyadic::zero();
        }
        // make the exponent even and give the root prec+3 bits
        let want = 2 * (prec as i64 + 3);
        let mut k = (want - self.mag.bits() as i64).max(0);
        if (self.exp - k).rem_euclid(2) != 0 {
            k += 1;
        }
        let m = &self.mag << (k as u64);
        let s = m.sqrt();
        let exact = &s * &s == m;
        round_parts(false, &s, (self.exp - k) / 2, !exact, prec, dir)
    }

    /// Real cube root rounded to `prec` bits.
    pub fn cbrt_round(&self, prec: u32, dir: Round) -> Dyadic {
        if self.is_zero() {
            return Dyadic::zero();
        }
        let mag_dir = if self.neg { dir.flip() } else { dir };
        let want = 3 * (prec as i64 + 3);
        let mut k = (want - self.mag.bits() as i64).max(0);
        while (self.exp - k).rem_euclid(3) != 0 {
            k += 1;
        }
        let m = &self.mag << (k as u64);
        let s = m.cbrt();
        let exact = &s * &s * &s == m;
        let r = round_parts(false, &s, (self.exp - k) / 3, !exact, prec, mag_dir);
        if self.neg {
            r.neg()
        } else {
            r
        }
    }

    /// Directed rounding of an exact rational to `prec` bits.
    pub fn from_rational(q: &Rational, prec: u32, dir: Round) -> Dyadic {
        if q.is_zero() {
            return Dyadic::zero();
        }
        let neg = q.is_negative();
        let n = q.numer().magnitude();
        let d = q.denom().magnitude();
        if d.is_one() {
            return Dyadic::from_parts(neg, n.clone(), 0).round(prec, dir);
        }
        if let Some(tz) = d.trailing_zeros() {
            if d.bits() == tz + 1 {
                return Dyadic::from_parts(neg, n.clone(), -(tz as i64)).round(prec, dir);
            }
        }
        let k = (prec as i64 + 3 + d.bits() as i64 - n.bits() as i64).max(0);
        let (quot, rem) = (n << (k as u64)).div_rem(d);
        round_parts(neg, &quot, -k, !rem.is_zero(), prec, dir)
    }

    /// Exact conversion when the rational is dyadic.
    pub fn try_from_rational_exact(q: &Rational) -> Option<Dyadic> {
        let d = q.denom().magnitude();
        let tz = d.trailing_zeros().unwrap_or(0);
        if d.bits() != tz + 1 {
            return None;
        }
        Some(Dyadic::from_parts(q.is_negative(), q.numer().magnitude().clone(), -(tz as i64)))
    }

    /// Largest integer not above the value.
    pub fn floor_int(&self) -> BigInt {
        if self.exp >= 0 {
            return bigint_from_parts(self.neg, &self.mag << (self.exp as u64));
        }
        let s = (-self.exp) as u64;
        let t = &self.mag >> s;
        let exact = (&t << s) == self.mag;
        if self.neg {
            let v = if exact { t } else { t + 1u32 };
            -BigInt::from(v)
        } else {
            BigInt::from(t)
        }
    }

    pub fn min(a: &Dyadic, b: &Dyadic) -> Dyadic {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn max(a: &Dyadic, b: &Dyadic) -> Dyadic {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn cmp_rational(&self, q: &Rational) -> Ordering {
        self.to_rational().cmp(q)
    }
}

fn cmp_mag(a: &Dyadic, b: &Dyadic) -> Ordering {
    match (a.mag.is_zero(), b.mag.is_zero()) {
        (true, true) => return Ordering::Equal,
        (true, false) => return Ordering::Less,
        (false, true) => return Ordering::Greater,
        _ => {}
    }
    let ta = a.top_exp();
    let tb = b.top_exp();
    if ta != tb {
        return ta.cmp(&tb);
    }
    let e = a.exp.min(b.exp);
    let ma = &a.mag << ((a.exp - e) as u64);
    let mb = &b.mag << ((b.exp - e) as u64);
    ma.cmp(&mb)
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.signum(), other.signum()) {
            (a, b) if a != b => a.cmp(&b),
            (0, 0) => Ordering::Equal,
            (1, _) => cmp_mag(self, other),
            _ => cmp_mag(other, self),
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for Dyadic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_rational())
    }
}

/// Rounds `±(mag + sticky) * 2^exp` to `prec` bits. When `sticky` is set the
/// true magnitude lies strictly between `mag` and `mag + 1` (in units of 2^exp),
/// and `mag` must have more than `prec + 1` bits.
fn round_parts(neg: bool, mag: &BigUint, exp: i64, sticky: bool, prec: u32, dir: Round) -> Dyadic {
    let bits = mag.bits();
    let prec = prec.max(2) as u64;
    if bits <= prec {
        if !sticky {
            return Dyadic::from_parts(neg, mag.clone(), exp);
        }
        // short mantissa: bump one unit away from zero when the direction demands it
        debug_assert!(false, "round_parts called without extra bits");
        let away = matches!((dir, neg), (Round::Up, false) | (Round::Down, true));
        let m = if away { mag + 1u32 } else { mag.clone() };
        return Dyadic::from_parts(neg, m, exp).round(prec as u32, dir);
    }
    let s = bits - prec;
    let mut t = mag >> s;
    let rem = mag - (&t << s);
    let inexact = sticky || !rem.is_zero();
    // direction on magnitude: away from zero or toward zero
    let away = match dir {
        Round::Up => !neg && inexact,
        Round::Down => neg && inexact,
        Round::Nearest => {
            let half = BigUint::one() << (s - 1);
            match rem.cmp(&half) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => sticky || t.is_odd(),
            }
        }
    };
    if away {
        t += 1u32;
    }
    Dyadic::from_parts(neg, t, exp + s as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(x: f64) -> Dyadic {
        Dyadic::from_f64(x).unwrap()
    }

    #[test]
    fn canonical_equality() {
        assert_eq!(Dyadic::from_i64(4), Dyadic::pow2(2));
        assert_eq!(d(0.5).add(&d(0.5)), Dyadic::one());
        assert_eq!(d(-0.0), Dyadic::zero());
    }

    #[test]
    fn ordering() {
        let xs = [-3.5, -1.0, -0.25, 0.0, 1e-300, 0.75, 2.0, 1e300];
        for (i, a) in xs.iter().enumerate() {
            for (j, b) in xs.iter().enumerate() {
                assert_eq!(d(*a).cmp(&d(*b)), i.cmp(&j), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn directed_division_brackets_one_third() {
        let lo = Dyadic::one().div_round(&Dyadic::from_i64(3), 60, Round::Down);
        let hi = Dyadic::one().div_round(&Dyadic::from_i64(3), 60, Round::Up);
        let third = Rational::new(1.into(), 3.into());
        assert!(lo.to_rational() < third && third < hi.to_rational());
        assert!(hi.sub(&lo) <= Dyadic::pow2(-61));
    }

    #[test]
    fn sqrt_exact_and_directed() {
        assert_eq!(Dyadic::from_i64(9).sqrt_round(10, Round::Down), Dyadic::from_i64(3));
        let lo = Dyadic::from_i64(2).sqrt_round(100, Round::Down);
        let hi = Dyadic::from_i64(2).sqrt_round(100, Round::Up);
        assert!(lo.mul(&lo) < Dyadic::from_i64(2));
        assert!(hi.mul(&hi) > Dyadic::from_i64(2));
    }

    #[test]
    fn cbrt_handles_sign() {
        assert_eq!(Dyadic::from_i64(-27).cbrt_round(10, Round::Up), Dyadic::from_i64(-3));
        let lo = Dyadic::from_i64(-2).cbrt_round(80, Round::Down);
        let hi = Dyadic::from_i64(-2).cbrt_round(80, Round::Up);
        assert!(lo < hi);
        assert!(lo.mul(&lo).mul(&lo) < Dyadic::from_i64(-2));
        assert!(hi.mul(&hi).mul(&hi) > Dyadic::from_i64(-2));
    }

    #[test]
    fn add_round_with_huge_gap_stays_directed() {
        let big = Dyadic::one();
        let tiny = Dyadic::pow2(-100_000);
        assert!(big.add_round(&tiny, 53, Round::Up) > big);
        assert_eq!(big.add_round(&tiny, 53, Round::Down), big);
        assert_eq!(big.add_round(&tiny.neg(), 53, Round::Up), big);
        assert!(big.add_round(&tiny.neg(), 53, Round::Down) < big);
        assert_eq!(big.add_round(&tiny, 53, Round::Nearest), big);
    }

    #[test]
    fn to_f64_matches_rational_path() {
        let third = Dyadic::one().div_round(&Dyadic::from_i64(3), 200, Round::Nearest);
        assert_eq!(third.to_f64().to_bits(), 0x3FD5555555555555);
    }

    #[test]
    fn floor_int_of_negatives() {
        assert_eq!(d(-2.5).floor_int(), BigInt::from(-3));
        assert_eq!(d(2.5).floor_int(), BigInt::from(2));
        assert_eq!(d(-2.0).floor_int(), BigInt::from(-2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn directed_rounding_brackets(a in -1e12f64..1e12, b in -1e12f64..1e12, p in 2u32..80) {
                let (x, y) = (d(a), d(b));
                let exact = x.mul(&y);
                let lo = exact.round(p, Round::Down);
                let hi = exact.round(p, Round::Up);
                prop_assert!(lo <= exact && exact <= hi);
                prop_assert!(lo.mantissa_bits() <= p as u64 && hi.mantissa_bits() <= p as u64);
                let s = x.add(&y);
                prop_assert!(x.add_round(&y, p, Round::Down) <= s);
                prop_assert!(x.add_round(&y, p, Round::Up) >= s);
            }

            #[test]
            fn rational_round_trip(n in any::<i64>(), k in -80i64..80) {
                let x = Dyadic::from_i64(n).ldexp(k);
                let q = x.to_rational();
                prop_assert_eq!(Dyadic::from_rational(&q, 200, Round::Down), x.clone());
                prop_assert_eq!(Dyadic::try_from_rational_exact(&q), Some(x));
            }
        }
    }
}
