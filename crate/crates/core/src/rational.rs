//! Exact rational numbers.
//!
//! A thin newtype over [`malachite_q::Rational`], which keeps small values
//! inline, that fixes the textual encoding used everywhere in this crate:
//! integers print as plain decimals, everything else as `num/den` in lowest
//! terms with a positive denominator.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use malachite_base::num::arithmetic::traits::{Abs, Reciprocal};
use malachite_base::num::basic::traits::{One, Zero};
use malachite_base::num::conversion::traits::{IsInteger, RoundingFrom};
use malachite_base::rounding_modes::RoundingMode;
use malachite_nz::integer::Integer;
use malachite_q::Rational as Q;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(Q);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as an exact rational (expected `n` or `n/d`)")]
pub struct ParseRationalError(pub String);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(Q::from_signeds(numer, denom))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(Q::from(n))
    }

    pub fn zero() -> Self {
        Rational(Q::ZERO)
    }

    pub fn one() -> Self {
        Rational(Q::ONE)
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0u32
    }

    pub fn is_positive(&self) -> bool {
        self.0 > 0u32
    }

    pub fn is_negative(&self) -> bool {
        self.0 < 0u32
    }

    pub fn is_integer(&self) -> bool {
        (&self.0).is_integer()
    }

    /// Denominator in lowest terms, if it fits in a `u64`.
    pub fn denom_u64(&self) -> Option<u64> {
        u64::try_from(self.0.denominator_ref()).ok()
    }

    pub fn abs(&self) -> Self {
        Rational((&self.0).abs())
    }

    pub fn recip(&self) -> Self {
        Rational((&self.0).reciprocal())
    }

    pub fn to_f64(&self) -> f64 {
        f64::rounding_from(&self.0, RoundingMode::Nearest).0
    }

    /// Exact conversion of a finite float (every finite `f64` is a dyadic rational).
    pub fn from_f64(value: f64) -> Option<Self> {
        Q::try_from(value).ok().map(Rational)
    }

    /// Nearest rational with denominator at most `max_denom` (continued fractions).
    pub fn approximate(value: f64, max_denom: i64) -> Self {
        let sign = if value < 0.0 { -1 } else { 1 };
        let mut x = value.abs();
        let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
        loop {
            let a = x.floor();
            if a > i64::MAX as f64 / 4.0 {
                break;
            }
            let a = a as i64;
            let p2 = a.saturating_mul(p1).saturating_add(p0);
            let q2 = a.saturating_mul(q1).saturating_add(q0);
            if q2 > max_denom {
                break;
            }
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
            let frac = x - a as f64;
            if frac < 1e-15 {
                break;
            }
            x = 1.0 / frac;
        }
        if q1 == 0 {
            return Rational::from_integer(sign * p1);
        }
        Rational::new(sign * p1, q1)
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// The value as an `i64` when it is an integer in range.
    pub fn to_i64(&self) -> Option<i64> {
        i64::try_from(&self.0).ok()
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError(s.to_string());
        let trimmed = s.trim();
        let (num, den) = match trimmed.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (trimmed, "1"),
        };
        let num = Integer::from_str(num).map_err(|_| err())?;
        let den = Integer::from_str(den).map_err(|_| err())?;
        if den == 0u32 {
            return Err(err());
        }
        Ok(Rational(Q::from_integers(num, den)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.to_i64() {
            Some(n) => serializer.serialize_i64(n),
            None => serializer.serialize_str(&self.to_string()),
        }
    }
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an integer or a string of the form \"num/den\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::from_integer(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational(Q::from(v)))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
        Err(E::custom(format!(
            "floating-point number {v} is not allowed; write it as an integer or \"num/den\""
        )))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<i64> for Rational {
            type Output = Rational;
            fn $method(self, rhs: i64) -> Rational {
                self.$method(Rational::from_integer(rhs))
            }
        }
        impl<'a> $trait<i64> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: i64) -> Rational {
                self.$method(Rational::from_integer(rhs))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Rational> for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl SubAssign<Rational> for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        self.0 -= rhs.0;
    }
}

impl MulAssign<&Rational> for Rational {
    fn mul_assign(&mut self, rhs: &Rational) {
        self.0 *= &rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

/// Shorthand for `Rational::new(n, d)`.
pub fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// Shorthand for an integer rational.
pub fn ri(n: i64) -> Rational {
    Rational::from_integer(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lowest_terms_and_sign() {
        let x = Rational::new(6, -4);
        assert_eq!(x.to_string(), "-3/2");
        assert_eq!(x.denom_u64(), Some(2));
        assert_eq!(Rational::new(800, 3).to_string(), "800/3");
        assert_eq!(Rational::new(10, 5).to_string(), "2");
    }

    #[test]
    fn parse_forms() {
        assert_eq!("800/3".parse::<Rational>().unwrap(), r(800, 3));
        assert_eq!(" -7 ".parse::<Rational>().unwrap(), ri(-7));
        assert_eq!("4/-6".parse::<Rational>().unwrap(), r(-2, 3));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("0.5".parse::<Rational>().is_err());
    }

    #[test]
    fn json_encoding() {
        let v = vec![ri(200), r(800, 3), ri(-25)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[200,"800/3",-25]"#);
        let back: Vec<Rational> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Rational>("0.5").is_err());
        assert_eq!(serde_json::from_str::<Rational>("\"3\"").unwrap(), ri(3));
    }

    #[test]
    fn approximate_recovers_small_fractions() {
        assert_eq!(Rational::approximate(2.0 / 3.0 + 1e-12, 1000), r(2, 3));
        assert_eq!(Rational::approximate(-0.2, 100), r(-1, 5));
        assert_eq!(Rational::approximate(5.0, 100), ri(5));
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(n in -10_000i64..10_000, d in 1i64..10_000) {
            let x = Rational::new(n, d);
            let s = serde_json::to_string(&x).unwrap();
            let y: Rational = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(&x, &y);
            prop_assert_eq!(serde_json::to_string(&y).unwrap(), s);
        }

        #[test]
        fn field_identities(a in -500i64..500, b in 1i64..50, c in -500i64..500, d in 1i64..50) {
            let x = Rational::new(a, b);
            let y = Rational::new(c, d);
            prop_assert_eq!(&(&x + &y) - &y, x.clone());
            if !y.is_zero() {
                prop_assert_eq!(&(&x * &y) / &y, x.clone());
            }
        }
    }
}
