//! Exact arbitrary-precision integer and rational arithmetic.
//!
//! Wavelength sets are only meaningful when their least common multiple and
//! the derived integer vector are exact; denominators in realistic inputs
//! reach 10^11 and common multiples exceed 10^22, so 64-bit arithmetic is not
//! an option. Values are backed by [`num_bigint::BigInt`] and
//! [`num_rational::BigRational`], which store fractions canonically
//! (reduced, positive denominator).

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::real::Real;

/// Arbitrary-precision integer.
pub type Integer = BigInt;

/// Arbitrary-precision fraction, always stored reduced with positive
/// denominator. Equality is field-wise.
pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("undefined gcd: all inputs are zero")]
    UndefinedGcd,
    #[error("empty input")]
    Empty,
    #[error("inputs must be positive")]
    NotPositive,
    #[error("malformed rational {0:?}: expected \"a/b\", \"a.b\" or an integer")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// Greatest common divisor of a nonempty list of nonnegative integers.
///
/// Folds the binary Euclidean gcd; errors if every input is zero, since
/// gcd(0, ..., 0) is undefined.
pub fn gcd_all(xs: &[Integer]) -> Result<Integer, ExactError> {
    if xs.is_empty() {
        return Err(ExactError::Empty);
    }
    if xs.iter().any(|x| x.is_negative()) {
        return Err(ExactError::NotPositive);
    }
    let g = xs.iter().fold(Integer::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        Err(ExactError::UndefinedGcd)
    } else {
        Ok(g)
    }
}

/// Least common multiple of a nonempty list of positive integers,
/// accumulated pairwise as `a * b / gcd(a, b)` in arbitrary precision.
pub fn lcm_ints(xs: &[Integer]) -> Result<Integer, ExactError> {
    if xs.is_empty() {
        return Err(ExactError::Empty);
    }
    if xs.iter().any(|x| !x.is_positive()) {
        return Err(ExactError::NotPositive);
    }
    Ok(xs.iter().fold(Integer::one(), |acc, x| acc.lcm(x)))
}

/// Least common multiple of a nonempty list of positive rationals: the
/// smallest positive rational `m` such that `m / x` is an integer for every
/// input `x`. For reduced fractions this is
/// `lcm(numerators) / gcd(denominators)`.
pub fn rational_lcm(xs: &[Rational]) -> Result<Rational, ExactError> {
    if xs.is_empty() {
        return Err(ExactError::Empty);
    }
    if xs.iter().any(|x| !x.is_positive()) {
        return Err(ExactError::NotPositive);
    }
    let numer = lcm_ints(&xs.iter().map(|x| x.numer().clone()).collect::<Vec<_>>())?;
    let denom = gcd_all(&xs.iter().map(|x| x.denom().clone()).collect::<Vec<_>>())?;
    Ok(Rational::new(numer, denom))
}

/// Parses an exact rational from `"a/b"`, a decimal string `"a.b"` (taken
/// exactly as a fraction over a power of ten), or a plain integer.
///
/// Decimal strings never round-trip through binary floating point.
pub fn parse_rational(s: &str) -> Result<Rational, ExactError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ExactError::Malformed(s.to_string()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: Integer = num
            .trim()
            .parse()
            .map_err(|_| ExactError::Malformed(s.to_string()))?;
        let den: Integer = den
            .trim()
            .parse()
            .map_err(|_| ExactError::Malformed(s.to_string()))?;
        if den.is_zero() {
            return Err(ExactError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let (sign, int_digits) = match int_part.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, int_part.strip_prefix('+').unwrap_or(int_part)),
        };
        if !int_digits.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || (int_digits.is_empty() && frac_part.is_empty())
        {
            return Err(ExactError::Malformed(s.to_string()));
        }
        let digits = format!("{int_digits}{frac_part}");
        let num: Integer = if digits.is_empty() {
            Integer::zero()
        } else {
            digits
                .parse()
                .map_err(|_| ExactError::Malformed(s.to_string()))?
        };
        let den = Integer::from(10u32).pow(frac_part.len() as u32);
        return Ok(Rational::new(num * sign, den));
    }
    s.parse::<Integer>()
        .map(Rational::from_integer)
        .map_err(|_| ExactError::Malformed(s.to_string()))
}

/// Loss-accepting conversion into the working scalar, used wherever an exact
/// value crosses into floating-point territory.
pub fn to_real<F: Real>(x: &Rational) -> F {
    match x.to_f64() {
        Some(v) => F::from_f64(v).unwrap_or_else(F::infinity),
        // Fallback for magnitudes outside f64 range.
        None => {
            let n = x.numer().to_f64().unwrap_or(f64::INFINITY);
            let d = x.denom().to_f64().unwrap_or(f64::INFINITY);
            F::from_f64(n / d).unwrap_or_else(F::infinity)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn ints(xs: &[i64]) -> Vec<Integer> {
        xs.iter().map(|&x| Integer::from(x)).collect()
    }

    #[test]
    fn gcd_all_examples() {
        assert_eq!(gcd_all(&ints(&[15, 10, 6])).unwrap(), Integer::from(1));
        assert_eq!(gcd_all(&ints(&[42])).unwrap(), Integer::from(42));
        assert_eq!(gcd_all(&ints(&[6, 4])).unwrap(), Integer::from(2));
        assert_eq!(gcd_all(&ints(&[0, 0])), Err(ExactError::UndefinedGcd));
        assert_eq!(gcd_all(&ints(&[0, 9, 6])).unwrap(), Integer::from(3));
    }

    #[test]
    fn lcm_ints_examples() {
        assert_eq!(lcm_ints(&ints(&[2, 3])).unwrap(), Integer::from(6));
        assert_eq!(lcm_ints(&ints(&[6, 3])).unwrap(), Integer::from(6));
        assert_eq!(
            lcm_ints(&ints(&[22, 66, 77, 110, 11])).unwrap(),
            Integer::from(2310)
        );
        assert!(lcm_ints(&ints(&[2, 0])).is_err());
    }

    #[test]
    fn rational_lcm_fixtures() {
        assert_eq!(
            rational_lcm(&[rat("2"), rat("3"), rat("5")]).unwrap(),
            rat("30")
        );
        assert_eq!(
            rational_lcm(&[rat("30/13"), rat("15/4"), rat("5")]).unwrap(),
            rat("30")
        );
        assert_eq!(rational_lcm(&[rat("7/3")]).unwrap(), rat("7/3"));
        assert_eq!(
            rational_lcm(&[rat("22/3"), rat("66/17"), rat("77/18"), rat("110/31"), rat("11")])
                .unwrap(),
            rat("2310")
        );
    }

    #[test]
    fn parse_decimal_is_exact() {
        assert_eq!(rat("1547.5881138772"), rat("3868970284693/2500000000"));
        assert_eq!(rat("0.5"), rat("1/2"));
        assert_eq!(rat("-2.25"), rat("-9/4"));
        assert_eq!(rat("1528"), Rational::from_integer(1528.into()));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("a.b").is_err());
        assert!(parse_rational("1.5e3").is_err());
        assert!(parse_rational("").is_err());
    }

    proptest! {
        // m = rational_lcm(x, y) divides exactly, and no m/k with k in 2..10
        // is still a common multiple: minimality within integer shrinkage.
        #[test]
        fn rational_lcm_divides_and_is_minimal(
            (a, b, c, d) in (1i64..200, 1i64..200, 1i64..200, 1i64..200)
        ) {
            let x = Rational::new(a.into(), b.into());
            let y = Rational::new(c.into(), d.into());
            let m = rational_lcm(&[x.clone(), y.clone()]).unwrap();
            prop_assert!((m.clone() / &x).is_integer());
            prop_assert!((m.clone() / &y).is_integer());
            for k in 2i64..=10 {
                let smaller = m.clone() / Rational::from_integer(k.into());
                let still_common =
                    (smaller.clone() / &x).is_integer() && (smaller / &y).is_integer();
                prop_assert!(!still_common);
            }
        }

        #[test]
        fn rational_lcm_permutation_and_duplication(
            xs in proptest::collection::vec((1i64..100, 1i64..100), 2..5)
        ) {
            let rats: Vec<Rational> =
                xs.iter().map(|&(n, d)| Rational::new(n.into(), d.into())).collect();
            let base = rational_lcm(&rats).unwrap();
            let mut rev = rats.clone();
            rev.reverse();
            prop_assert_eq!(rational_lcm(&rev).unwrap(), base.clone());
            let mut dup = rats.clone();
            dup.push(rats[0].clone());
            prop_assert_eq!(rational_lcm(&dup).unwrap(), base);
        }
    }
}
