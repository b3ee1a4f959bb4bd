//! Exact rational helpers.
//!
//! Sizes, coordinates and analysis quantities are kept as `Ratio<i128>` so that
//! interval classification and touching faces are decided without rounding.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result};

pub type Rational = Ratio<i128>;

/// Unbounded rational for sums over many unrelated denominators.
pub type BigRational = Ratio<BigInt>;

pub fn to_big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// `side^d` without intermediate overflow.
pub fn big_volume(side: &Rational, d: usize) -> BigRational {
    let s = to_big(side);
    (0..d).fold(BigRational::one(), |acc, _| acc * &s)
}

/// Parses `"3/20"`, `"0.35"`, `"1e-4"`, `"2.5E-1"` or `"7"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let err = || Error::ParseNumber(text.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_rational(num)?;
        let d = parse_rational(den)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    // 10^30 already exceeds what sizes need; anything longer would risk overflow later.
    if int_part.len() + frac_part.len() > 30 || exponent.abs() > 30 {
        return Err(err());
    }
    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer * 10 + i128::from(c as u8 - b'0');
    }
    let scale = exponent - frac_part.len() as i32;
    let value = if scale >= 0 {
        Rational::from_integer(numer * pow10(scale as u32))
    } else {
        Rational::new(numer, pow10((-scale) as u32))
    };
    Ok(if negative { -value } else { value })
}

fn pow10(e: u32) -> i128 {
    10i128.pow(e)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Renders a rational as a short decimal when it terminates, as `p/q` otherwise.
pub fn render(r: &Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut den = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let scaled = r * Rational::from_integer(pow10(places));
    let n = scaled.to_integer();
    let sign = if n.is_negative() { "-" } else { "" };
    let n = n.abs();
    let p = pow10(places);
    format!("{sign}{}.{:0width$}", n / p, n % p, width = places as usize)
}

pub fn pow(r: &Rational, e: usize) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..e {
        acc *= r;
    }
    acc
}

pub fn floor_to_u64(r: &Rational) -> u64 {
    r.floor().to_integer().max(0) as u64
}

pub fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> i128 {
    values.into_iter().fold(1i128, |acc, v| acc.lcm(v.denom()))
}

/// Serializes rationals through [`render`] so reports stay human-readable and exact.
pub mod rendered {
    use super::{render, Rational};
    use serde::Serializer;

    pub fn one<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&render(r))
    }

    pub fn many<S: Serializer>(rs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(rs.iter().map(render))
    }
}
