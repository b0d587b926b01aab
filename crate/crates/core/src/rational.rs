//! Exact rational helpers on top of `num_rational::BigRational`.

use alloc::format;
use alloc::string::String;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::combin::binomial_big;
use crate::error::{Error, Result};

/// Exact rational with arbitrary precision numerator and denominator.
pub type Rational = num_rational::BigRational;

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn from_biguint(v: BigUint) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// `C(n, k)` as a rational, zero outside the usual range.
pub fn binom_q(n: i64, k: i64) -> Rational {
    from_biguint(binomial_big(n, k))
}

pub fn pow(base: &Rational, exp: usize) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Renders as `"numerator/denominator"`, always with an explicit denominator.
pub fn to_fraction_string(v: &Rational) -> String {
    format!("{}/{}", v.numer(), v.denom())
}

/// Parses `"a/b"` or a bare integer `"a"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parameter(format!("cannot parse rational {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// Lossy conversion for reporting only.
pub fn to_f64(v: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or_else(|| {
        // both parts too large for f64; scale through the bit lengths
        let nb = v.numer().bits() as i64;
        let db = v.denom().bits() as i64;
        let shift = (nb - 60).max(0) as usize;
        let dshift = (db - 60).max(0) as usize;
        let n = (v.numer().abs() >> shift).to_f64().unwrap_or(0.0);
        let d = (v.denom() >> dshift).to_f64().unwrap_or(1.0);
        let sign = if v.is_negative() { -1.0 } else { 1.0 };
        sign * n / d * libm::pow(2.0, (shift as f64) - (dshift as f64))
    })
}

/// Natural log of a nonnegative integer; `-inf` at zero.
pub fn ln_biguint(v: &BigUint) -> f64 {
    use num_traits::ToPrimitive;
    let bits = v.bits();
    if bits <= 1000 {
        return libm::log(v.to_f64().unwrap_or(f64::INFINITY));
    }
    let shift = bits - 60;
    libm::log((v >> shift).to_f64().unwrap()) + shift as f64 * core::f64::consts::LN_2
}

/// Natural log of a positive rational, computed without overflow.
pub fn ln_rational(v: &Rational) -> f64 {
    if !v.is_positive() {
        return if v.is_zero() { f64::NEG_INFINITY } else { f64::NAN };
    }
    let n = v.numer().magnitude();
    ln_biguint(n) - ln_biguint(v.denom().magnitude())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_strings_round_trip() {
        let v = ratio(-19, 168);
        assert_eq!(to_fraction_string(&v), "-19/168");
        assert_eq!(parse_rational("-19/168").unwrap(), v);
        assert_eq!(to_fraction_string(&int(3)), "3/1");
        assert_eq!(parse_rational(" 6 / 4 ").unwrap(), ratio(3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn logs_of_huge_values() {
        let big = pow(&int(10), 400);
        assert!((ln_rational(&big) - 400.0 * libm::log(10.0)).abs() < 1e-9);
        assert!((ln_rational(&big.recip()) + 400.0 * libm::log(10.0)).abs() < 1e-9);
        assert!((ln_rational(&ratio(3, 4)) - libm::log(0.75)).abs() < 1e-15);
        assert_eq!(ln_rational(&int(0)), f64::NEG_INFINITY);
    }

    #[test]
    fn binom_and_pow() {
        assert_eq!(binom_q(9, 1), int(9));
        assert_eq!(binom_q(6, -1), int(0));
        assert_eq!(pow(&ratio(1, 2), 10), ratio(1, 1024));
        assert!((to_f64(&ratio(1, 3)) - 1.0 / 3.0).abs() < 1e-15);
    }
}
