//! Verified enclosures of elementary functions over dyadic intervals.
//!
//! Every function returns an interval that contains the true image; series are
//! summed in interval arithmetic and their truncation remainders are added
//! explicitly.

use std::cell::RefCell;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;

use super::dinterval::DInterval;
use super::dyadic::{Dyadic, Round};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TranscError {
    #[error("argument outside the function's domain")]
    Domain,
    #[error("result magnitude outside the supported exponent range")]
    OutOfRange,
}

/// Extra bits carried inside series evaluation beyond the requested precision.
const GUARD: u32 = 24;
/// Arguments with |x| >= 2^EXP_ARG_LIMIT_BITS make exp unrepresentable here.
const EXP_ARG_LIMIT_BITS: i64 = 40;

thread_local! {
    static PI_CACHE: RefCell<Option<(u32, DInterval)>> = const { RefCell::new(None) };
    static LN2_CACHE: RefCell<Option<(u32, DInterval)>> = const { RefCell::new(None) };
}

fn cached(
    cache: &'static std::thread::LocalKey<RefCell<Option<(u32, DInterval)>>>,
    prec: u32,
    compute: fn(u32) -> DInterval,
) -> DInterval {
    cache.with(|c| {
        if let Some((p, v)) = c.borrow().as_ref() {
            if *p >= prec {
                return v.round_out(prec);
            }
        }
        let bucket = prec.div_ceil(256) * 256;
        let v = compute(bucket);
        *c.borrow_mut() = Some((bucket, v.clone()));
        v.round_out(prec)
    })
}

fn tiny(prec: u32) -> Dyadic {
    Dyadic::pow2(-(prec as i64))
}

fn small_int(n: u64) -> DInterval {
    DInterval::point(Dyadic::from_i64(n as i64))
}

/// Enclosure of π.
pub fn pi(prec: u32) -> DInterval {
    cached(&PI_CACHE, prec, compute_pi)
}

/// Enclosure of ln 2.
pub fn ln2(prec: u32) -> DInterval {
    cached(&LN2_CACHE, prec, compute_ln2)
}

fn atan_inv(n: u64, w: u32) -> DInterval {
    // atan(1/n) = sum (-1)^k / ((2k+1) n^(2k+1)), alternating and decreasing
    let inv_n = DInterval::one().div(&small_int(n), w).expect("n > 0");
    let inv_n2 = inv_n.sqr(w);
    let mut pw = inv_n;
    let mut sum = DInterval::zero();
    let mut k: u64 = 0;
    let eps = tiny(w + 4);
    loop {
        let term = pw.div(&small_int(2 * k + 1), w).expect("positive");
        sum = if k % 2 == 0 { sum.add(&term, w) } else { sum.sub(&term, w) };
        pw = pw.mul(&inv_n2, w);
        k += 1;
        if pw.hi < eps {
            break;
        }
    }
    sum.inflate(&pw.hi, w)
}

fn compute_pi(prec: u32) -> DInterval {
    let w = prec + GUARD;
    let a = atan_inv(5, w).ldexp(4);
    let b = atan_inv(239, w).ldexp(2);
    a.sub(&b, w)
}

fn compute_ln2(prec: u32) -> DInterval {
    // ln 2 = 2 atanh(1/3); all terms positive
    let w = prec + GUARD;
    let z = DInterval::one().div(&small_int(3), w).expect("nonzero");
    let z2 = z.sqr(w);
    let mut pw = z;
    let mut sum = DInterval::zero();
    let mut k: u64 = 0;
    let eps = tiny(w + 4);
    loop {
        sum = sum.add(&pw.div(&small_int(2 * k + 1), w).expect("positive"), w);
        pw = pw.mul(&z2, w);
        k += 1;
        if pw.hi < eps {
            break;
        }
    }
    let tail = DInterval::new(Dyadic::zero(), pw.hi.ldexp(1));
    sum.add(&tail, w).ldexp(1)
}

fn int_bits(k: &BigInt) -> u32 {
    k.bits() as u32
}

/// Enclosure of exp(x) for a dyadic point.
pub fn exp_point(x: &Dyadic, prec: u32) -> Result<DInterval, TranscError> {
    if x.is_zero() {
        return Ok(DInterval::one());
    }
    if x.top_exp() > EXP_ARG_LIMIT_BITS {
        if x.is_negative() {
            // exp(x) in (0, 2^-2^39): enclose by [0, tiny]
            return Ok(DInterval::new(Dyadic::zero(), Dyadic::pow2(-(1i64 << 39))));
        }
        return Err(TranscError::OutOfRange);
    }
    let w = prec + GUARD;
    let k = (x.approx_f64() / std::f64::consts::LN_2).round() as i64;
    let kb = int_bits(&BigInt::from(k));
    let s: u32 = 10;
    let wr = w + kb + s + 8;
    let r = DInterval::point(x.clone()).sub(&ln2(wr).mul_dyadic(&Dyadic::from_i64(k), wr), wr);
    let rp = r.ldexp(-(s as i64));
    let mut sum = DInterval::one();
    let mut term = DInterval::one();
    let eps = tiny(wr + 4);
    let mut n: u64 = 1;
    loop {
        term = term.mul(&rp, wr).div(&small_int(n), wr).expect("n > 0");
        sum = sum.add(&term, wr);
        if term.max_abs() < eps {
            break;
        }
        n += 1;
    }
    // |rp| < 1/2 so the tail is bounded by the last term
    sum = sum.inflate(&term.max_abs(), wr);
    for _ in 0..s {
        sum = sum.sqr(wr);
    }
    Ok(sum.ldexp(k).round_out(w))
}

/// Enclosure of ln(x) for a positive dyadic point.
pub fn log_point(x: &Dyadic, prec: u32) -> Result<DInterval, TranscError> {
    if !x.is_positive() {
        return Err(TranscError::Domain);
    }
    if *x == Dyadic::one() {
        return Ok(DInterval::zero());
    }
    let w = prec + GUARD;
    let mut e = x.top_exp() - 1;
    let mut m = x.ldexp(-e);
    let three_halves = Dyadic::from_i64(3).ldexp(-1);
    if m > three_halves {
        m = m.ldexp(-1);
        e += 1;
    }
    let eb = int_bits(&BigInt::from(e));
    let wl = w + eb + 8;
    let mp = DInterval::point(m.clone());
    let num = mp.sub(&DInterval::one(), wl);
    let den = mp.add(&DInterval::one(), wl);
    let z = num.div(&den, wl).expect("m + 1 > 0");
    let z2 = z.sqr(wl);
    let mut pw = z;
    let mut sum = DInterval::zero();
    let mut k: u64 = 0;
    let eps = tiny(wl + 4);
    loop {
        sum = sum.add(&pw.div(&small_int(2 * k + 1), wl).expect("positive"), wl);
        pw = pw.mul(&z2, wl);
        k += 1;
        if pw.max_abs() < eps {
            break;
        }
    }
    // |z| <= 1/5, so the tail is at most 1.05 |pw| / (2k+1) < 2 |pw|
    sum = sum.inflate(&pw.max_abs().ldexp(1), wl);
    let mut res = sum.ldexp(1);
    if e != 0 {
        res = res.add(&ln2(wl).mul_dyadic(&Dyadic::from_i64(e), wl), wl);
    }
    Ok(res.round_out(w))
}

fn unit_interval() -> DInterval {
    DInterval::new(Dyadic::from_i64(-1), Dyadic::one())
}

fn clamp_unit(v: DInterval) -> DInterval {
    v.intersect(&unit_interval()).unwrap_or_else(unit_interval)
}

/// Enclosures of (sin x, cos x) for a dyadic point.
pub fn sin_cos_point(x: &Dyadic, prec: u32) -> (DInterval, DInterval) {
    if x.is_zero() {
        return (DInterval::zero(), DInterval::one());
    }
    let w = prec + GUARD;
    let xt = x.top_exp().max(0) as u32;
    let wr = w + xt + 8;
    let halfpi = pi(wr).ldexp(-1);
    let xp = DInterval::point(x.clone());
    let q = xp.div(&halfpi, wr).expect("pi > 0");
    let k = q.lo.add(&Dyadic::pow2(-1)).floor_int();
    let r = xp.sub(&halfpi.mul_dyadic(&Dyadic::from_bigint(&k), wr), wr);
    let r2 = r.sqr(wr);
    let eps = tiny(wr + 4);

    let mut sin = r.clone();
    let mut term = r.clone();
    let mut n: u64 = 1;
    loop {
        term = term.mul(&r2, wr).div(&small_int((2 * n) * (2 * n + 1)), wr).expect("nonzero").neg();
        sin = sin.add(&term, wr);
        if term.max_abs() < eps {
            break;
        }
        n += 1;
    }
    sin = sin.inflate(&term.max_abs(), wr);

    let mut cos = DInterval::one();
    let mut term = DInterval::one();
    let mut n: u64 = 1;
    loop {
        term = term.mul(&r2, wr).div(&small_int((2 * n - 1) * (2 * n)), wr).expect("nonzero").neg();
        cos = cos.add(&term, wr);
        if term.max_abs() < eps {
            break;
        }
        n += 1;
    }
    cos = cos.inflate(&term.max_abs(), wr);

    let quadrant = k.mod_floor(&BigInt::from(4)).to_u8().expect("0..4");
    let (s, c) = match quadrant {
        0 => (sin, cos),
        1 => (cos, sin.neg()),
        2 => (sin.neg(), cos.neg()),
        _ => (cos.neg(), sin),
    };
    (clamp_unit(s.round_out(w)), clamp_unit(c.round_out(w)))
}

pub fn exp_iv(a: &DInterval, prec: u32) -> Result<DInterval, TranscError> {
    let lo = exp_point(&a.lo, prec)?.lo;
    let hi = exp_point(&a.hi, prec)?.hi;
    Ok(DInterval::new(lo, hi))
}

pub fn log_iv(a: &DInterval, prec: u32) -> Result<DInterval, TranscError> {
    if !a.lo.is_positive() {
        return Err(TranscError::Domain);
    }
    let lo = log_point(&a.lo, prec)?.lo;
    let hi = log_point(&a.hi, prec)?.hi;
    Ok(DInterval::new(lo, hi))
}

pub fn sqrt_iv(a: &DInterval, prec: u32) -> Result<DInterval, TranscError> {
    if a.lo.is_negative() {
        return Err(TranscError::Domain);
    }
    Ok(DInterval::new(a.lo.sqrt_round(prec, Round::Down), a.hi.sqrt_round(prec, Round::Up)))
}

pub fn cbrt_iv(a: &DInterval, prec: u32) -> DInterval {
    DInterval::new(a.lo.cbrt_round(prec, Round::Down), a.hi.cbrt_round(prec, Round::Up))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Trig {
    Sin,
    Cos,
}

fn trig_iv(a: &DInterval, prec: u32, f: Trig) -> DInterval {
    let pick = |x: &Dyadic| {
        let (s, c) = sin_cos_point(x, prec);
        if f == Trig::Sin {
            s
        } else {
            c
        }
    };
    if a.is_point() {
        return pick(&a.lo);
    }
    if a.width() >= Dyadic::from_i64(6) {
        return unit_interval();
    }
    let mut v = pick(&a.lo).hull(&pick(&a.hi));
    let top = a.lo.top_exp().max(a.hi.top_exp()).max(0) as u32;
    let w = prec + GUARD + top + 8;
    let halfpi = pi(w).ldexp(-1);
    let ql = DInterval::point(a.lo.clone()).div(&halfpi, w).expect("pi > 0");
    let qh = DInterval::point(a.hi.clone()).div(&halfpi, w).expect("pi > 0");
    let mut j = ql.lo.floor_int();
    let jmax = qh.hi.floor_int() + 1;
    let four = BigInt::from(4);
    while j <= jmax {
        let c = halfpi.mul_dyadic(&Dyadic::from_bigint(&j), w);
        if c.hi >= a.lo && c.lo <= a.hi {
            let r = j.mod_floor(&four).to_u8().expect("0..4");
            let (max_at, min_at) = if f == Trig::Sin { (1, 3) } else { (0, 2) };
            if r == max_at {
                v.hi = Dyadic::one();
            } else if r == min_at {
                v.lo = Dyadic::from_i64(-1);
            }
        }
        j += 1;
    }
    clamp_unit(v)
}

pub fn sin_iv(a: &DInterval, prec: u32) -> DInterval {
    trig_iv(a, prec, Trig::Sin)
}

pub fn cos_iv(a: &DInterval, prec: u32) -> DInterval {
    trig_iv(a, prec, Trig::Cos)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(x: f64) -> Dyadic {
        Dyadic::from_f64(x).unwrap()
    }

    fn assert_encloses(iv: &DInterval, x: f64) {
        // x is the libm value, itself within an ulp of the truth
        let lo = iv.lo.to_f64();
        let hi = iv.hi.to_f64();
        assert!((lo - x).abs() <= x.abs() * 4.5e-16 + 1e-300, "{lo} vs {x}");
        assert!((hi - x).abs() <= x.abs() * 4.5e-16 + 1e-300, "{hi} vs {x}");
    }

    #[test]
    fn constants_match_known_digits() {
        let p = pi(300);
        assert_eq!(p.lo.to_f64(), std::f64::consts::PI);
        assert_eq!(p.hi.to_f64(), std::f64::consts::PI);
        assert!(p.width() < Dyadic::pow2(-290));
        let l = ln2(300);
        assert_eq!(l.lo.to_f64(), std::f64::consts::LN_2);
        assert!(l.width() < Dyadic::pow2(-290));
    }

    #[test]
    fn exp_log_sin_cos_agree_with_libm() {
        for x in [1e-8, 0.3, 1.0, -2.5, 10.0, 700.0, -700.0, 1e5 / 7.0] {
            if x < 709.0 {
                assert_encloses(&exp_point(&d(x), 128).unwrap(), x.exp());
            }
            let (s, c) = sin_cos_point(&d(x), 128);
            assert_encloses(&s, x.sin());
            assert_encloses(&c, x.cos());
        }
        for x in [1e-300, 0.1, 0.99, 1.5, 2.0, 3.0, 1e10, 1e300] {
            assert_encloses(&log_point(&d(x), 128).unwrap(), x.ln());
        }
    }

    #[test]
    fn enclosures_are_narrow() {
        for x in [0.5f64, 3.0, 1e10] {
            let e = exp_point(&d(x.min(50.0)), 200).unwrap();
            assert!(e.width() <= e.hi.abs().ldexp(-200));
            let l = log_point(&d(x), 200).unwrap();
            assert!(l.width() <= Dyadic::max(&l.hi.abs(), &Dyadic::one()).ldexp(-200));
            let (s, _) = sin_cos_point(&d(x), 200);
            assert!(s.width() <= Dyadic::pow2(-200));
        }
    }

    #[test]
    fn huge_sine_argument_reduces_correctly() {
        // sin(1e22) is a classic argument-reduction test value
        let (s, _) = sin_cos_point(&d(1e22), 128);
        assert_encloses(&s, -0.8522008497671888);
    }

    #[test]
    fn trig_interval_includes_critical_points() {
        let v = sin_iv(&DInterval::new(d(0.0), d(4.0)), 128);
        assert_eq!(v.hi, Dyadic::one());
        assert!(v.lo.to_f64() <= -0.7568024953079282);
        let c = cos_iv(&DInterval::new(d(3.0), d(3.5)), 128);
        assert_eq!(c.lo, Dyadic::from_i64(-1));
        let c2 = cos_iv(&DInterval::new(d(0.5), d(1.0)), 128);
        assert!(c2.hi < Dyadic::one());
    }

    #[test]
    fn domain_errors() {
        assert_eq!(log_point(&Dyadic::zero(), 64), Err(TranscError::Domain));
        assert!(sqrt_iv(&DInterval::new(d(-1.0), d(1.0)), 64).is_err());
        assert_eq!(exp_point(&d(1e15), 64), Err(TranscError::OutOfRange));
    }
}
