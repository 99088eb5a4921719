//! Exact and multiprecision numerics: rationals, dyadic intervals, verified
//! elementary functions, binary64 rounding and the real-valued oracle.

pub mod dinterval;
pub mod dyadic;
pub mod float;
pub mod format;
pub mod interval;
pub mod real;
pub mod transcendental;

use serde::{Deserialize, Serialize};

pub use dinterval::DInterval;
pub use dyadic::{Dyadic, Round};
pub use float::{f64_to_rational, from_ordinal, next_down, next_up, ordinal_of, round_down, round_nearest, round_up, ulps_between, FloatError};
pub use interval::{Interval, IntervalError, TranscOp};
pub use real::{eval_real, RealError, RealValue};

/// Arbitrary-precision exact rational.
pub type Rational = num_rational::BigRational;

/// JSON form of a rational: three significant digits plus the exact value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactRational(pub Rational);

#[derive(Serialize, Deserialize)]
struct ExactRepr {
    approx: String,
    exact: String,
}

impl Serialize for ExactRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let exact = if self.0.is_integer() {
            self.0.numer().to_string()
        } else {
            format!("{}/{}", self.0.numer(), self.0.denom())
        };
        ExactRepr { approx: format::sci3(&self.0), exact }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactRational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = ExactRepr::deserialize(d)?;
        format::parse_number(&r.exact)
            .map(ExactRational)
            .ok_or_else(|| serde::de::Error::custom(format!("bad rational {}", r.exact)))
    }
}

/// Parses a decimal or `n/d` literal into an exact rational.
pub fn rational(s: &str) -> Option<Rational> {
    format::parse_number(s)
}

/// `2^k` as an exact rational.
pub fn pow2(k: i64) -> Rational {
    Dyadic::pow2(k).to_rational()
}
