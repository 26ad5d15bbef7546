//! Number plumbing shared by the solvers: a small scalar trait implemented for
//! `f64` and exact rationals, parsing and formatting helpers.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Arithmetic needed by the simplex solvers.
///
/// Float comparisons use a fixed absolute tolerance, rational ones are exact.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const EXACT: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_f64(x: f64) -> Self;
    fn from_rational(x: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero_tol(&self) -> bool;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn abs_val(&self) -> Self;
}

pub const F64_TOL: f64 = 1e-9;

impl Scalar for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_rational(x: &Rational) -> Self {
        rat_to_f64(x)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero_tol(&self) -> bool {
        self.abs() <= F64_TOL
    }
    fn is_pos(&self) -> bool {
        *self > F64_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -F64_TOL
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        ratio(num, den)
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }
    fn from_rational(x: &Rational) -> Self {
        x.clone()
    }
    fn to_f64(&self) -> f64 {
        rat_to_f64(self)
    }
    fn is_zero_tol(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
    fn abs_val(&self) -> Self {
        Signed::abs(self)
    }
}

pub fn ratio(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_to_f64(x: &Rational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(x) {
        if v.is_finite() {
            return v;
        }
    }
    // huge numerators and denominators: scale down before dividing
    let n = x.numer().bits() as i64;
    let d = x.denom().bits() as i64;
    let shift = (n.max(d) - 60).max(0) as usize;
    let nn = ToPrimitive::to_f64(&(x.numer() >> shift)).unwrap_or(0.0);
    let dd = ToPrimitive::to_f64(&(x.denom() >> shift)).unwrap_or(1.0);
    nn / dd
}

/// Parses "3/16", "0.25", "2" or "1e-3" into an exact rational. Decimal strings
/// are converted digit by digit, not through a float.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| bad_number(s))?;
        let d: BigInt = b.trim().parse().map_err(|_| bad_number(s))?;
        if d.is_zero() {
            return Err(Error::Invalid(format!("zero denominator in '{s}'")));
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad_number(s))?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (ip, fp) = digits.split_once('.').unwrap_or((digits, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad_number(s));
    }
    let all = format!("{ip}{fp}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad_number(s));
    }
    let n: BigInt = all.parse().map_err(|_| bad_number(s))?;
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(n * num::pow(ten, scale as usize))
    } else {
        BigRational::new(n, num::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

fn bad_number(s: &str) -> Error {
    Error::Invalid(format!("cannot parse number '{s}'"))
}

pub fn format_rational(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Best rational approximation with denominator at most `max_den`
/// (continued fractions).
pub fn rationalize(x: f64, max_den: u64) -> Rational {
    if x == 0.0 || !x.is_finite() {
        return int(0);
    }
    let exact = BigRational::from_float(x).expect("finite");
    let neg = x < 0.0;
    let mut v = if neg { -exact } else { exact };
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let limit = BigInt::from(max_den);
    loop {
        let a = v.floor().to_integer();
        let q2 = &q0 + &a * &q1;
        if q2 > limit {
            break;
        }
        let p2 = &p0 + &a * &p1;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let frac = &v - BigRational::from_integer(a);
        if frac.is_zero() {
            break;
        }
        v = frac.recip();
    }
    let r = if q1.is_zero() { int(0) } else { BigRational::new(p1, q1) };
    if neg {
        -r
    } else {
        r
    }
}

/// Decimal rendering with `sig` significant digits, trailing zeros trimmed
/// (the behaviour of C's `%.{sig}g` without the exponent form).
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x.is_infinite() { format!("{x}") } else { "0".into() };
    }
    let mag = x.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - mag).clamp(0, 40) as usize;
    let mut s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Serde adapter storing a rational as a "p/q" string; numbers are accepted on input.
pub mod serde_rational {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        from_value(&v).map_err(D::Error::custom)
    }

    pub(crate) fn from_value(v: &serde_json::Value) -> std::result::Result<Rational, String> {
        match v {
            serde_json::Value::String(s) => parse_rational(s).map_err(|e| e.to_string()),
            serde_json::Value::Number(n) => parse_rational(&n.to_string()).map_err(|e| e.to_string()),
            other => Err(format!("expected a number or fraction string, got {other}")),
        }
    }
}

pub mod serde_rational_vec {
    use super::*;
    use serde::de::Error as _;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&format_rational(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let vs = Vec::<serde_json::Value>::deserialize(d)?;
        vs.iter().map(|v| super::serde_rational::from_value(v).map_err(D::Error::custom)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/16").unwrap(), ratio(3, 16));
        assert_eq!(parse_rational("0.3125").unwrap(), ratio(5, 16));
        assert_eq!(parse_rational("-2").unwrap(), int(-2));
        assert_eq!(parse_rational("1e-3").unwrap(), ratio(1, 1000));
        assert_eq!(parse_rational("2.5E1").unwrap(), int(25));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.3125, 12), "0.3125");
        assert_eq!(fmt_sig(2.0, 12), "2");
        assert_eq!(fmt_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(fmt_sig(123456.7890123456, 12), "123456.789012");
        assert_eq!(fmt_sig(-0.0, 12), "0");
    }

    #[test]
    fn rationalize_recovers_simple_fractions() {
        assert_eq!(rationalize(0.3125, 1 << 20), ratio(5, 16));
        assert_eq!(rationalize(1.0 / 3.0, 1000), ratio(1, 3));
        assert_eq!(rationalize(-0.75, 100), ratio(-3, 4));
    }

    #[test]
    fn huge_rationals_convert_to_float() {
        let big = num::pow(BigInt::from(3), 700);
        let x = BigRational::new(big.clone(), big * BigInt::from(2));
        assert!((rat_to_f64(&x) - 0.5).abs() < 1e-15);
    }
}
