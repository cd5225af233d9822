//! Exact time values.
//!
//! Time-scale endpoints and grid nodes are stored as `i64` rationals so that
//! jump operators, graininess, and dualization satisfy their identities with
//! zero tolerance. Floating point enters only when a value is handed to the
//! numerical layer via [`to_f64`].

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact time value: a rational number on the real line.
pub type TimePoint = Rational64;

/// Converts an exact time value to the nearest `f64`.
pub fn to_f64(t: &TimePoint) -> f64 {
    t.to_f64().expect("rational out of f64 range")
}

/// Builds a time value from an integer.
pub fn from_int(k: i64) -> TimePoint {
    TimePoint::from_integer(k)
}

/// Parses a decimal literal into an exact rational.
///
/// Accepted forms: `-3`, `0.5`, `1e-3`, `2.5e2`, and explicit fractions
/// `p/q`. Binary floating point never enters: `0.1` parses to exactly 1/10.
pub fn parse_time(text: &str) -> Result<TimePoint> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::InvalidParameter("empty time literal".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_decimal(num.trim())?;
        let d = parse_decimal(den.trim())?;
        if d.is_zero() {
            return Err(Error::InvalidParameter(format!(
                "zero denominator in '{s}'"
            )));
        }
        return Ok(n / d);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<TimePoint> {
    let bad = || Error::InvalidParameter(format!("invalid time literal '{s}'"));
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => (-1i64, r),
        None => (1i64, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp) = match rest.split_once(['e', 'E']) {
        Some((m, e)) => {
            let exp: i32 = e.parse().map_err(|_| bad())?;
            (m, exp)
        }
        None => (rest, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let value: i64 = if digits.is_empty() {
        0
    } else {
        digits
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("time literal '{s}' too large")))?
    };
    let shift = exp - frac_part.len() as i32;
    let magnitude = shift.unsigned_abs();
    if magnitude > 18 {
        return Err(Error::InvalidParameter(format!(
            "time literal '{s}' needs more than 18 decimal digits"
        )));
    }
    let pow = 10i64.pow(magnitude);
    let r = if shift >= 0 {
        TimePoint::from_integer(
            value
                .checked_mul(pow)
                .ok_or_else(|| Error::InvalidParameter(format!("time literal '{s}' too large")))?,
        )
    } else {
        TimePoint::new(value, pow)
    };
    Ok(r * TimePoint::from_integer(sign))
}

/// Canonical display form: integer when possible, otherwise `p/q`.
pub fn format_time(t: &TimePoint) -> String {
    if t.is_integer() {
        t.numer().to_string()
    } else {
        format!("{}/{}", t.numer(), t.denom())
    }
}
