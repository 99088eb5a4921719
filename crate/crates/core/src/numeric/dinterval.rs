//! Outward-rounded intervals with dyadic endpoints.

use super::dyadic::{Dyadic, Round};
use super::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DInterval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl DInterval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        debug_assert!(lo <= hi, "inverted interval {lo} > {hi}");
        DInterval { lo, hi }
    }

    pub fn point(x: Dyadic) -> Self {
        DInterval { lo: x.clone(), hi: x }
    }

    pub fn zero() -> Self {
        DInterval::point(Dyadic::zero())
    }

    pub fn one() -> Self {
        DInterval::point(Dyadic::one())
    }

    pub fn from_rational(q: &Rational, prec: u32) -> Self {
        if let Some(d) = Dyadic::try_from_rational_exact(q) {
            if d.mantissa_bits() <= prec as u64 {
                return DInterval::point(d);
            }
        }
        DInterval {
            lo: Dyadic::from_rational(q, prec, Round::Down),
            hi: Dyadic::from_rational(q, prec, Round::Up),
        }
    }

    pub fn from_rationals(lo: &Rational, hi: &Rational, prec: u32) -> Self {
        DInterval {
            lo: Dyadic::from_rational(lo, prec, Round::Down),
            hi: Dyadic::from_rational(hi, prec, Round::Up),
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn intersects(&self, other: &DInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn is_subset_of(&self, other: &DInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Upper bound on the width, rounded to 64 bits.
    pub fn width(&self) -> Dyadic {
        self.hi.sub_round(&self.lo, 64, Round::Up)
    }

    pub fn max_abs(&self) -> Dyadic {
        Dyadic::max(&self.lo.abs(), &self.hi.abs())
    }

    /// Smallest magnitude in the interval (zero when it straddles zero).
    pub fn min_abs(&self) -> Dyadic {
        if self.contains_zero() {
            Dyadic::zero()
        } else if self.lo.is_positive() {
            self.lo.clone()
        } else {
            self.hi.abs()
        }
    }

    pub fn hull(&self, other: &DInterval) -> DInterval {
        DInterval { lo: Dyadic::min(&self.lo, &other.lo), hi: Dyadic::max(&self.hi, &other.hi) }
    }

    pub fn intersect(&self, other: &DInterval) -> Option<DInterval> {
        let lo = Dyadic::max(&self.lo, &other.lo);
        let hi = Dyadic::min(&self.hi, &other.hi);
        (lo <= hi).then_some(DInterval { lo, hi })
    }

    /// Outward rounding of both endpoints to `prec` bits.
    pub fn round_out(&self, prec: u32) -> DInterval {
        DInterval { lo: self.lo.round(prec, Round::Down), hi: self.hi.round(prec, Round::Up) }
    }

    pub fn neg(&self) -> DInterval {
        DInterval { lo: self.hi.neg(), hi: self.lo.neg() }
    }

    pub fn abs(&self) -> DInterval {
        if self.contains_zero() {
            DInterval { lo: Dyadic::zero(), hi: self.max_abs() }
        } else if self.lo.is_positive() {
            self.clone()
        } else {
            self.neg()
        }
    }

    pub fn ldexp(&self, k: i64) -> DInterval {
        DInterval { lo: self.lo.ldexp(k), hi: self.hi.ldexp(k) }
    }

    pub fn add(&self, o: &DInterval, prec: u32) -> DInterval {
        DInterval {
            lo: self.lo.add_round(&o.lo, prec, Round::Down),
            hi: self.hi.add_round(&o.hi, prec, Round::Up),
        }
    }

    pub fn sub(&self, o: &DInterval, prec: u32) -> DInterval {
        DInterval {
            lo: self.lo.sub_round(&o.hi, prec, Round::Down),
            hi: self.hi.sub_round(&o.lo, prec, Round::Up),
        }
    }

    pub fn mul(&self, o: &DInterval, prec: u32) -> DInterval {
        let products = [
            self.lo.mul(&o.lo),
            self.lo.mul(&o.hi),
            self.hi.mul(&o.lo),
            self.hi.mul(&o.hi),
        ];
        let mut lo = &products[0];
        let mut hi = &products[0];
        for p in &products[1..] {
            if p < lo {
                lo = p;
            }
            if p > hi {
                hi = p;
            }
        }
        DInterval { lo: lo.round(prec, Round::Down), hi: hi.round(prec, Round::Up) }
    }

    /// `self * self` with a non-negative lower end when the interval straddles 0.
    pub fn sqr(&self, prec: u32) -> DInterval {
        let a = self.abs();
        DInterval {
            lo: a.lo.mul(&a.lo).round(prec, Round::Down),
            hi: a.hi.mul(&a.hi).round(prec, Round::Up),
        }
    }

    /// Integer power with the tight even-power image.
    pub fn pow_u(&self, n: u32, prec: u32) -> DInterval {
        if n == 0 {
            return DInterval::one();
        }
        let base = if n % 2 == 0 { self.abs() } else { self.clone() };
        // odd powers and powers of non-negative ranges are monotone
        let lo = pow_dir(&base.lo, n, prec, Round::Down);
        let hi = pow_dir(&base.hi, n, prec, Round::Up);
        DInterval { lo, hi }
    }

    /// Returns `None` when the divisor contains zero.
    pub fn div(&self, o: &DInterval, prec: u32) -> Option<DInterval> {
        if o.contains_zero() {
            return None;
        }
        let cands = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo: Option<Dyadic> = None;
        let mut hi: Option<Dyadic> = None;
        for (a, b) in cands {
            let l = a.div_round(b, prec, Round::Down);
            let h = a.div_round(b, prec, Round::Up);
            if lo.as_ref().map_or(true, |x| &l < x) {
                lo = Some(l);
            }
            if hi.as_ref().map_or(true, |x| &h > x) {
                hi = Some(h);
            }
        }
        Some(DInterval { lo: lo.unwrap(), hi: hi.unwrap() })
    }

    pub fn mul_dyadic(&self, k: &Dyadic, prec: u32) -> DInterval {
        self.mul(&DInterval::point(k.clone()), prec)
    }

    /// Widens by `r >= 0` on both sides.
    pub fn inflate(&self, r: &Dyadic, prec: u32) -> DInterval {
        DInterval {
            lo: self.lo.sub_round(r, prec, Round::Down),
            hi: self.hi.add_round(r, prec, Round::Up),
        }
    }

    pub fn to_rationals(&self) -> (Rational, Rational) {
        (self.lo.to_rational(), self.hi.to_rational())
    }
}

/// Power of a single dyadic with directed rounding; `x` keeps its sign.
fn pow_dir(x: &Dyadic, n: u32, prec: u32, dir: Round) -> Dyadic {
    // exact power when cheap, else repeated directed multiplication on |x|
    if x.mantissa_bits() * n as u64 <= 4 * prec as u64 + 64 {
        let mut acc = Dyadic::one();
        for _ in 0..n {
            acc = acc.mul(x);
        }
        return acc.round(prec, dir);
    }
    let neg = x.is_negative() && n % 2 == 1;
    let mag_dir = if neg { dir.flip() } else { dir };
    let a = x.abs();
    let mut acc = Dyadic::one();
    for _ in 0..n {
        acc = acc.mul_round(&a, prec + 8, mag_dir);
    }
    let r = acc.round(prec, mag_dir);
    if neg {
        r.neg()
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> DInterval {
        DInterval::new(Dyadic::from_f64(a).unwrap(), Dyadic::from_f64(b).unwrap())
    }

    #[test]
    fn mul_mixed_signs() {
        let r = iv(1.0, 2.0).mul(&iv(-3.0, 4.0), 64);
        assert_eq!(r, iv(-6.0, 8.0));
    }

    #[test]
    fn even_power_is_tight() {
        assert_eq!(iv(-2.0, 3.0).pow_u(2, 64), iv(0.0, 9.0));
        assert_eq!(iv(-2.0, 3.0).pow_u(3, 64), iv(-8.0, 27.0));
        assert_eq!(iv(-3.0, -2.0).pow_u(2, 64), iv(4.0, 9.0));
    }

    #[test]
    fn division_by_straddling_interval_is_none() {
        assert!(iv(1.0, 2.0).div(&iv(-1.0, 1.0), 64).is_none());
        let q = iv(1.0, 1.0).div(&iv(3.0, 3.0), 64).unwrap();
        assert!(q.lo < q.hi);
    }

    #[test]
    fn min_and_max_abs() {
        assert_eq!(iv(-3.0, 2.0).max_abs(), Dyadic::from_i64(3));
        assert_eq!(iv(-3.0, 2.0).min_abs(), Dyadic::zero());
        assert_eq!(iv(-3.0, -2.0).min_abs(), Dyadic::from_i64(2));
    }
}
