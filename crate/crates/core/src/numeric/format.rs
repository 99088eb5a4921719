//! Decimal rendering of exact rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::Rational;

fn pow10(k: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), k as usize)
}

/// Splits `q` into `m * 10^e` with integer `m` when the decimal expansion
/// terminates.
fn terminating_decimal(q: &Rational) -> Option<(BigInt, i64)> {
    let mut d = q.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return None;
    }
    let k = twos.max(fives);
    let mut m = q.numer() * pow10(k) / q.denom();
    let mut e = -(k as i64);
    if m.is_zero() {
        return Some((m, 0));
    }
    let ten = BigInt::from(10);
    while (&m % &ten).is_zero() {
        m /= &ten;
        e += 1;
    }
    Some((m, e))
}

/// Exact FPCore literal: plain or scientific decimal when terminating,
/// otherwise `n/d`.
pub fn fpcore_number(q: &Rational) -> String {
    match terminating_decimal(q) {
        Some((m, e)) => plain_or_sci(&m, e),
        None => format!("{}/{}", q.numer(), q.denom()),
    }
}

fn plain_or_sci(m: &BigInt, e: i64) -> String {
    let neg = m.is_negative();
    let digits = m.abs().to_string();
    let sign = if neg { "-" } else { "" };
    let nd = digits.len() as i64;
    if e >= 0 {
        if e <= 6 {
            return format!("{sign}{digits}{}", "0".repeat(e as usize));
        }
    } else if -e < nd {
        let split = (nd + e) as usize;
        return format!("{sign}{}.{}", &digits[..split], &digits[split..]);
    } else if -e - nd < 6 {
        return format!("{sign}0.{}{}", "0".repeat((-e - nd) as usize), digits);
    }
    if nd == 1 {
        format!("{sign}{digits}e{e}")
    } else {
        format!("{sign}{}.{}e{}", &digits[..1], &digits[1..], e + nd - 1)
    }
}

/// Scientific notation with three significant digits, e.g. `2.38e-13`.
pub fn sci3(q: &Rational) -> String {
    if q.is_zero() {
        return "0".to_string();
    }
    let neg = q.is_negative();
    let a = q.abs();
    // estimate the decimal exponent, then correct
    let mut e = (ln_abs(&a) / std::f64::consts::LN_10).floor() as i64;
    let scaled = |e: i64| -> BigInt {
        // round(a / 10^(e-2)) half away from zero
        let s = e - 2;
        let v = if s >= 0 {
            a.clone() / Rational::from_integer(pow10(s as u32))
        } else {
            a.clone() * Rational::from_integer(pow10((-s) as u32))
        };
        (v + Rational::new(BigInt::one(), BigInt::from(2))).floor().to_integer()
    };
    let mut m = scaled(e);
    for _ in 0..4 {
        if m >= BigInt::from(1000) {
            e += 1;
            m = scaled(e);
        } else if m < BigInt::from(100) {
            e -= 1;
            m = scaled(e);
        } else {
            break;
        }
    }
    let ms = m.to_string();
    let sign = if neg { "-" } else { "" };
    let esign = if e < 0 { '-' } else { '+' };
    format!("{sign}{}.{}e{esign}{:02}", &ms[..1], &ms[1..], e.abs())
}

/// Natural logarithm of |q| as f64, valid far outside the f64 exponent range.
pub fn ln_abs(q: &Rational) -> f64 {
    ln_bigint(q.numer()) - ln_bigint(q.denom())
}

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.abs().to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 60;
    let top = (n.abs() >> shift).to_f64().unwrap_or(1.0);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Approximate f64 value of a rational, saturating to ±∞ / 0.
pub fn approx_f64(q: &Rational) -> f64 {
    super::float::round_nearest(q)
}

/// Parses a decimal, scientific or `n/d` literal exactly.
pub fn parse_number(s: &str) -> Option<Rational> {
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.parse().ok()?;
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = match mant.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    if exp.abs() > 100_000 {
        return None;
    }
    let digits: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
    let e = exp - frac_part.len() as i64;
    let mut q = if e >= 0 {
        Rational::from_integer(digits * pow10(e as u32))
    } else {
        Rational::new(digits, pow10((-e) as u32))
    };
    if neg {
        q = -q;
    }
    Some(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        parse_number(s).unwrap()
    }

    #[test]
    fn literal_round_trip() {
        for s in ["3", "-3", "331.4", "0.954929658551372", "1e-10", "1e10", "-2.5e-300", "1/3", "0.00125", "1000000"] {
            let v = q(s);
            assert_eq!(q(&fpcore_number(&v)), v, "{s} -> {}", fpcore_number(&v));
        }
        assert_eq!(fpcore_number(&q("331.4")), "331.4");
        assert_eq!(fpcore_number(&q("1e10")), "1e10");
        assert_eq!(fpcore_number(&q("1/3")), "1/3");
        assert_eq!(fpcore_number(&q("-0.5")), "-0.5");
        assert_eq!(fpcore_number(&q("2")), "2");
    }

    #[test]
    fn three_significant_digits() {
        assert_eq!(sci3(&q("2.18e-13")), "2.18e-13");
        assert_eq!(sci3(&q("0.0102")), "1.02e-02");
        assert_eq!(sci3(&q("42100")), "4.21e+04");
        assert_eq!(sci3(&q("9.996")), "1.00e+01");
        assert_eq!(sci3(&q("-1/3")), "-3.33e-01");
        assert_eq!(sci3(&q("1")), "1.00e+00");
        assert_eq!(sci3(&Rational::zero()), "0");
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", ".", "1.2.3", "abc", "1/0", "--1", "1e"] {
            assert!(parse_number(s).is_none(), "{s}");
        }
    }

    #[test]
    fn ln_of_huge_values() {
        let big = Rational::from_integer(BigInt::one() << 5000u32);
        assert!((ln_abs(&big) - 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }
}
