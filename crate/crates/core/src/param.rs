//! Exact parameter values.
//!
//! Mesh coordinates and knots are kept as exact rationals so that meshline
//! coincidence tests never depend on rounding. Floating point enters only at
//! evaluation and quadrature time.

use num_rational::Rational64;
use num_traits::ToPrimitive;

use crate::error::Error;

/// An exact parameter value (mesh coordinate or knot).
pub type Param = Rational64;

/// Builds `num / den`.
///
/// Panics if `den` is zero.
pub fn param(num: i64, den: i64) -> Param {
    Param::new(num, den)
}

/// Integer parameter.
pub fn int(v: i64) -> Param {
    Param::from_integer(v)
}

pub fn to_f64(p: Param) -> f64 {
    // Dyadic values convert exactly; anything else rounds to nearest.
    p.to_f64().unwrap_or(f64::NAN)
}

pub fn midpoint(a: Param, b: Param) -> Param {
    (a + b) / int(2)
}

/// Parses `"3"`, `"-3/4"` or a finite decimal such as `"1.25"` exactly.
pub fn parse_param(text: &str) -> Result<Param, Error> {
    let t = text.trim();
    let bad = || Error::Parse(format!("invalid parameter value `{text}`"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(param(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        let negative = whole.trim_start().starts_with('-');
        let digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 17 {
            return Err(bad());
        }
        let w: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let den = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
        let magnitude = w
            .checked_mul(den)
            .and_then(|v| v.checked_add(f))
            .ok_or_else(bad)?;
        return Ok(param(if negative { -magnitude } else { magnitude }, den));
    }
    t.parse::<i64>().map(int).map_err(|_| bad())
}
