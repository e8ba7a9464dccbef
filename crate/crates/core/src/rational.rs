//! Exact rational helpers.
//!
//! All probabilities, times and quotas are [`Rational`] values backed by
//! arbitrary-precision integers, so every mechanism output is exact.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Arbitrary-precision rational, always normalized (lowest terms, positive denominator).
pub type Rational = BigRational;

/// `num / den` as a normalized rational. Panics on a zero denominator.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn from_usize(value: usize) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// `max(0, x)`.
pub fn positive_part(x: &Rational) -> Rational {
    if x.is_positive() {
        x.clone()
    } else {
        Rational::zero()
    }
}

pub fn is_integral(x: &Rational) -> bool {
    x.denom().is_one()
}

/// Parses `"p"`, `"-p"` or `"p/q"`; surrounding whitespace is ignored.
pub fn parse_rational(text: &str) -> Result<Rational, Error> {
    let trimmed = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    match trimmed.split_once('/') {
        None => trimmed
            .parse::<BigInt>()
            .map(Rational::from_integer)
            .map_err(|_| bad()),
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {text:?}")));
            }
            Ok(Rational::new(n, d))
        }
    }
}

/// Canonical text form: `"p"` for integers, `"p/q"` otherwise.
pub fn format_rational(x: &Rational) -> String {
    x.to_string()
}

/// Lossy decimal rendering with `digits` significant digits (display only).
pub fn to_decimal(x: &Rational, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let negative = x.is_negative();
    let mut num = x.numer().abs();
    let den = x.denom().clone();
    let (int_part, rem) = num.div_rem(&den);
    num = rem;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    let mut significant = if int_part.is_zero() {
        0
    } else {
        int_part.to_string().len()
    };
    if num.is_zero() {
        return out;
    }
    out.push('.');
    let ten = BigInt::from(10);
    let mut frac = String::new();
    while significant < digits && !num.is_zero() {
        num *= &ten;
        let (d, r) = num.div_rem(&den);
        num = r;
        let d = d.to_u32().unwrap_or(0);
        if d != 0 || significant > 0 {
            significant += 1;
        }
        frac.push(char::from_digit(d, 10).unwrap_or('0'));
    }
    out.push_str(&frac);
    out
}

/// Largest integer not above `x`, as a rational.
pub fn floor(x: &Rational) -> Rational {
    x.floor()
}

pub fn ceil(x: &Rational) -> Rational {
    x.ceil()
}

/// Least common multiple of the denominators of `values` (1 for an empty input).
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}
