//! Conversions between `f64` and exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};

/// Denominator cap used when rounding solver output to rationals.
pub const DEFAULT_MAX_DENOMINATOR: u64 = 1_000_000;

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// The exact binary value of a finite float.
pub fn from_f64_exact(x: f64) -> BigRational {
    BigRational::from_f64(x).unwrap_or_else(BigRational::zero)
}

/// Best rational approximation with denominator at most `max_den`, from the
/// continued-fraction convergents of `x`.
pub fn rationalize(x: f64, max_den: u64) -> BigRational {
    if !x.is_finite() {
        return BigRational::zero();
    }
    let negative = x < 0.0;
    let mut rest = x.abs();
    // convergents h/k
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let cap = BigInt::from(max_den);
    let mut best = BigRational::zero();
    for _ in 0..64 {
        let a_f = rest.floor();
        let a = match BigInt::from_f64(a_f) {
            Some(a) => a,
            None => break,
        };
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        if k_next > cap {
            break;
        }
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        best = BigRational::new(h.clone(), k.clone());
        let frac = rest - a_f;
        if frac < 1e-15 * rest.max(1.0) {
            break;
        }
        rest = 1.0 / frac;
    }
    if negative {
        -best
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationalize_recovers_small_fractions() {
        assert_eq!(rationalize(0.5, 1000), ratio(1, 2));
        assert_eq!(rationalize(-2.0 / 3.0, 1000), ratio(-2, 3));
        assert_eq!(rationalize(1.0 + 1e-13, 1_000_000), int(1));
        assert_eq!(rationalize(0.0, 10), int(0));
        assert_eq!(rationalize(3.0, 10), int(3));
    }

    #[test]
    fn rationalize_respects_the_cap() {
        let r = rationalize(std::f64::consts::PI, 1000);
        assert!(r.denom() <= &BigInt::from(1000));
        assert_eq!(r, ratio(355, 113));
    }

    #[test]
    fn exact_float_conversion() {
        assert_eq!(from_f64_exact(0.25), ratio(1, 4));
        assert_eq!(to_f64(&from_f64_exact(0.1)), 0.1);
    }
}
