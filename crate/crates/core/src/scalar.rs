//! Scalar abstractions shared by the numeric modules.
//!
//! Two traits live here. [`Real`] is a floating-point type (f32 or f64) used
//! where square roots and trigonometry are needed, i.e. the spin algebra in
//! [`crate::qprob`]. [`Scalar`] is any ordered field the linear-programming
//! and inequality code can run over, which includes exact rationals.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Floating-point scalar for the quantum-probability code.
pub trait Real: Float + FloatConst + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an f64 tolerance into this type, raised to a small multiple of
    /// machine epsilon so that f32 does not get an unreachable threshold.
    fn tol(t: f64) -> Self {
        let t = Self::from(t).unwrap_or_else(Self::epsilon);
        t.max(Self::epsilon() * Self::from(256.0).unwrap())
    }

    fn lit(v: f64) -> Self {
        Self::from(v).expect("literal representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field used by the polytope, inequality and LDM code.
///
/// Exact types report `EXACT = true`; every tolerance then collapses to zero.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    /// Tolerance `t` in this type; zero for exact arithmetic.
    fn tol(t: f64) -> Self;

    fn ratio(num: i64, den: i64) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Parses `"3/8"`, `"0.375"` or `"1"`.
    fn parse_value(s: &str) -> Option<Self>;

    /// Converts a float read from JSON. Exact types go through the shortest
    /// decimal representation so that `0.1` becomes `1/10`.
    fn from_json_f64(v: f64) -> Option<Self>;

    fn to_json(&self) -> serde_json::Value;

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

fn parse_ratio_f64(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            (d != 0.0).then(|| n / d)
        }
        None => s.trim().parse().ok(),
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn tol(t: f64) -> Self {
                <$t as Real>::tol(t)
            }

            fn ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }

            fn parse_value(s: &str) -> Option<Self> {
                parse_ratio_f64(s).map(|v| v as $t)
            }

            fn from_json_f64(v: f64) -> Option<Self> {
                v.is_finite().then_some(v as $t)
            }

            fn to_json(&self) -> serde_json::Value {
                serde_json::Number::from_f64(*self as f64)
                    .map(serde_json::Value::Number)
                    .unwrap_or(serde_json::Value::Null)
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

/// Parses a decimal literal such as `-12.5e-3` exactly.
fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all = format!("{int_part}{frac_part}");
    let mut num = BigInt::from_str(if all.is_empty() { "0" } else { &all }).ok()?;
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    Some(if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    })
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn tol(_t: f64) -> Self {
        BigRational::zero()
    }

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse_value(s: &str) -> Option<Self> {
        match s.split_once('/') {
            Some((n, d)) => {
                let n = BigInt::from_str(n.trim()).ok()?;
                let d = BigInt::from_str(d.trim()).ok()?;
                (!d.is_zero()).then(|| BigRational::new(n, d))
            }
            None => parse_decimal(s),
        }
    }

    fn from_json_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        // `{:e}` on f64 prints the shortest round-tripping digits.
        parse_decimal(&format!("{v:e}"))
    }

    fn to_json(&self) -> serde_json::Value {
        if self.denom().is_one() {
            serde_json::Value::String(self.numer().to_string())
        } else {
            serde_json::Value::String(format!("{}/{}", self.numer(), self.denom()))
        }
    }
}

/// Reads a JSON number or a `"p/q"` string into `S`.
pub fn scalar_from_json<S: Scalar>(v: &serde_json::Value) -> Option<S> {
    match v {
        serde_json::Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => S::from_i64(i),
            (None, Some(f)) => S::from_json_f64(f),
            _ => None,
        },
        serde_json::Value::String(s) => S::parse_value(s),
        _ => None,
    }
}

/// Exact conversion of a float into a rational (every finite f64 is one).
pub fn exact_from_f64(v: f64) -> Option<BigRational> {
    BigRational::from_float(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(BigRational::parse_value("0.375"), Some(BigRational::ratio(3, 8)));
        assert_eq!(BigRational::parse_value("3/8"), Some(BigRational::ratio(3, 8)));
        assert_eq!(BigRational::parse_value("-1.5e1"), Some(BigRational::ratio(-15, 1)));
        assert_eq!(BigRational::parse_value(".5"), Some(BigRational::ratio(1, 2)));
        assert_eq!(BigRational::parse_value("abc"), None);
        assert_eq!(BigRational::parse_value("1/0"), None);
    }

    #[test]
    fn json_floats_use_shortest_decimal() {
        assert_eq!(BigRational::from_json_f64(0.1), Some(BigRational::ratio(1, 10)));
        assert_eq!(BigRational::from_json_f64(0.375), Some(BigRational::ratio(3, 8)));
        assert_eq!(BigRational::from_json_f64(f64::NAN), None);
    }

    #[test]
    fn float_tolerances_are_floored_at_epsilon() {
        assert_eq!(<f64 as Scalar>::tol(1e-9), 1e-9);
        assert!(<f32 as Scalar>::tol(1e-12) > 1e-6);
        assert!(<BigRational as Scalar>::tol(1e-9).is_zero());
    }

    #[test]
    fn json_round_trip() {
        let r = BigRational::ratio(3, 8);
        assert_eq!(scalar_from_json::<BigRational>(&r.to_json()), Some(r));
        assert_eq!(scalar_from_json::<f64>(&serde_json::json!("1/4")), Some(0.25));
        assert_eq!(scalar_from_json::<f64>(&serde_json::json!(1)), Some(1.0));
    }
}
