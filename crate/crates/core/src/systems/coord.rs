use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Breakpoints closer than this are merged in floating-point mode.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Scalar used for breakpoints and lengths.
///
/// Two modes exist: `f64` with a merge tolerance of [`MERGE_TOLERANCE`], and
/// [`BigRational`] where every comparison is exact and the tolerance is zero.
pub trait Coord: Clone + PartialOrd + Signed + fmt::Debug + Send + Sync + 'static {
    /// Absolute tolerance used when deduplicating breakpoints.
    fn tolerance() -> Self;

    fn to_f64(&self) -> f64;

    /// Exact conversion for rationals (the binary value of the float).
    fn from_f64(x: f64) -> Option<Self>;

    fn from_ratio(numer: i64, denom: i64) -> Self;

    /// True when the mode has no rounding.
    fn is_exact() -> bool;

    /// Keep a computed image point inside `[0, 1)` after rounding.
    fn clamp_unit(self) -> Self;

    fn near(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::tolerance()
    }
}

impl Coord for f64 {
    fn tolerance() -> Self {
        MERGE_TOLERANCE
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn is_exact() -> bool {
        false
    }

    fn clamp_unit(self) -> Self {
        if self < 0.0 {
            0.0
        } else if self >= 1.0 {
            1.0 - f64::EPSILON / 2.0
        } else {
            self
        }
    }
}

impl Coord for BigRational {
    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64(x: f64) -> Option<Self> {
        <BigRational as num_traits::FromPrimitive>::from_f64(x)
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn is_exact() -> bool {
        true
    }

    fn clamp_unit(self) -> Self {
        self
    }
}

/// A number read from a descriptor: either a float or an exact fraction
/// written as a string such as `"2/7"`.
#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Float(f64),
    Ratio(BigRational),
}

impl Number {
    pub fn parse(text: &str) -> Option<Number> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(Number::Ratio(BigRational::new(n, d)));
        }
        if let Ok(n) = text.parse::<BigInt>() {
            return Some(Number::Ratio(BigRational::from_integer(n)));
        }
        text.parse::<f64>().ok().filter(|x| x.is_finite()).map(Number::Float)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Ratio(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Float(x) => *x,
            Number::Ratio(r) => Coord::to_f64(r),
        }
    }

    /// Convert into the target scalar; floats become their exact binary
    /// value in rational mode.
    pub fn to_coord<S: Coord>(&self) -> Option<S> {
        match self {
            Number::Float(x) => S::from_f64(*x),
            Number::Ratio(r) => {
                if S::is_exact() {
                    // Route through a ratio of integers when it fits, otherwise
                    // through the float value.
                    match (r.numer().to_i64(), r.denom().to_i64()) {
                        (Some(n), Some(d)) => Some(S::from_ratio(n, d)),
                        _ => S::from_f64(Coord::to_f64(r)),
                    }
                } else {
                    S::from_f64(Coord::to_f64(r))
                }
            }
        }
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::Float(x)
    }
}

impl<'de> serde::Deserialize<'de> for Number {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            I(i64),
            F(f64),
            S(String),
        }
        match Raw::deserialize(de)? {
            Raw::I(n) => Ok(Number::Ratio(BigRational::from_integer(n.into()))),
            Raw::F(x) => Ok(Number::Float(x)),
            Raw::S(s) => Number::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("not a number: {s:?}"))),
        }
    }
}

impl serde::Serialize for Number {
    fn serialize<Ser: serde::Serializer>(&self, ser: Ser) -> Result<Ser::Ok, Ser::Error> {
        match self {
            Number::Float(x) => ser.serialize_f64(*x),
            Number::Ratio(r) => ser.serialize_str(&format!("{}/{}", r.numer(), r.denom())),
        }
    }
}
