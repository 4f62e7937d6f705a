//! Exact rational scalars and their `"num/den"` text form used in all file formats.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rat = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RatParseError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(num: i64) -> Rat {
    Rat::from_integer(BigInt::from(num))
}

/// Parses `"num/den"` or a bare integer.
pub fn parse_rat(s: &str) -> Result<Rat, RatParseError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(RatParseError::Empty);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| RatParseError::Invalid(s.to_string()))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| RatParseError::Invalid(s.to_string()))?;
    if den.is_zero() {
        return Err(RatParseError::ZeroDenominator(s.to_string()));
    }
    Ok(Rat::new(num, den))
}

/// Formats in lowest terms; integers render without the `/1` suffix.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back through a scaled division for out-of-range big integers.
        let num = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let den = r.denom().to_f64().unwrap_or(f64::INFINITY);
        num / den
    })
}

/// Bit length of the binary encoding of a rational: bits of |numerator| plus
/// bits of the denominator, counting zero as one bit.
pub fn rat_bit_size(r: &Rat) -> u64 {
    fn bits(x: &BigUint) -> u64 {
        x.bits().max(1)
    }
    bits(r.numer().magnitude()) + bits(r.denom().magnitude())
}

pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Serde adapter: `Rat` as a `"num/den"` string.
pub mod serde_rat {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(de)?;
        parse_rat(&s).map_err(D::Error::custom)
    }
}

/// Serde adapter: `Option<Rat>` as an optional `"num/den"` string.
pub mod serde_opt_rat {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rat>, ser: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => ser.serialize_some(&format_rat(r)),
            None => ser.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Rat>, D::Error> {
        let s: Option<String> = Option::deserialize(de)?;
        match s {
            Some(s) => Ok(Some(parse_rat(&s).map_err(D::Error::custom)?)),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_roundtrip() {
        for s in ["3", "-7", "1/3", "-22/7", "0"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(format_rat(&r), s);
        }
        // Non-canonical input normalizes.
        assert_eq!(format_rat(&parse_rat("4/8").unwrap()), "1/2");
        assert_eq!(format_rat(&parse_rat("3/1").unwrap()), "3");
        assert_eq!(format_rat(&parse_rat("2/-4").unwrap()), "-1/2");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_rat("").is_err());
        assert!(parse_rat("a/b").is_err());
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), BigUint::from(10u32));
        assert_eq!(binomial(5, 0), BigUint::from(1u32));
        assert_eq!(binomial(5, 6), BigUint::zero());
    }

    #[test]
    fn bit_size_counts_both_parts() {
        assert_eq!(rat_bit_size(&rat_int(0)), 2); // 0 -> 1 bit, den 1 -> 1 bit
        assert_eq!(rat_bit_size(&rat_int(1)), 2);
        assert_eq!(rat_bit_size(&rat(7, 2)), 5); // 111 / 10
    }
}
