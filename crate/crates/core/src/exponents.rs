//! Exact rational arithmetic for the exponent algebra: the critical exponent
//! of the main boundedness range, Stein-Tomas exponents, interpolation
//! parameters, and the admissibility condition they must satisfy.

use num::{BigInt, BigRational, FromPrimitive, One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Critical exponent
/// (2 dbar1 (d2-1) + 2 d2 (d2+1)) / (dbar1 (d2-1) + 3 d2^2 + 1),
/// requiring dbar1 >= d2 - 1.
pub fn critical_exponent(dbar1: i64, d2: i64) -> Result<BigRational> {
    critical_exponent_variant(dbar1, d2, false)
}

/// With `as_printed = true`, returns the variant whose numerator carries a
/// single dbar1 (d2-1) term instead of twice that; the default reproduces
/// both the worked example value 2 - 8/(N+7) and the limiting value 1, so it
/// is the one exposed by `critical_exponent`.
pub fn critical_exponent_variant(dbar1: i64, d2: i64, as_printed: bool) -> Result<BigRational> {
    if d2 < 1 || dbar1 < 0 {
        return Err(Error::InvalidParameter(
            "critical exponent needs d2 >= 1 and dbar1 >= 0".into(),
        ));
    }
    if dbar1 < d2 - 1 {
        return Err(Error::ExponentCondition { dbar1, d2 });
    }
    let lead = if as_printed { 1 } else { 2 };
    let num = int(lead * dbar1 * (d2 - 1)) + int(2 * d2 * (d2 + 1));
    let den = int(dbar1 * (d2 - 1)) + int(3 * d2 * d2 + 1);
    Ok(num / den)
}

/// Stein-Tomas exponent 2(n+1)/(n+3).
pub fn stein_tomas(n: i64) -> BigRational {
    rat(2 * (n + 1), n + 3)
}

/// Dual Stein-Tomas exponent 2(n+1)/(n-1); undefined for n = 1.
pub fn stein_tomas_dual(n: i64) -> Option<BigRational> {
    if n >= 2 {
        Some(rat(2 * (n + 1), n - 1))
    } else {
        None
    }
}

/// Exact exponent table for a given integrability exponent p in [1, 2] and
/// group dimensions (d1, d2, r0).
#[derive(Debug, Clone)]
pub struct ExponentTable {
    pub d1: i64,
    pub d2: i64,
    pub r0: i64,
    pub dbar1: i64,
    pub p: BigRational,
    pub p_prime: Option<BigRational>,
    /// q with 1/q = 1/p - 1/2; `None` encodes q = infinity (p = 2).
    pub q: Option<BigRational>,
    pub st_d1: BigRational,
    pub st_d2: BigRational,
    pub st_min: BigRational,
    pub st_d2_prime: Option<BigRational>,
    pub theta_p: Option<BigRational>,
    pub vartheta_p: Option<BigRational>,
    /// d (1/p - 1/2) with d = d1 + d2.
    pub s_threshold: BigRational,
    pub p_critical: Option<BigRational>,
    /// dbar1/q - vartheta_p d2/2 - (d2-1)/2 >= 0, evaluated exactly.
    pub admissible: Option<bool>,
    /// Equivalent dual form 1/p' <= (dbar1 - (d2-1)) / (2 dbar1 + d2 ST(d2)').
    pub admissible_dual: Option<bool>,
}

fn interpolation_parameter(p: &BigRational, endpoint: &BigRational) -> Option<BigRational> {
    // Solve 1/p = (1 - theta) + theta / endpoint.
    let one = BigRational::one();
    let denom = &one - endpoint.recip();
    if denom.is_zero() {
        return None;
    }
    Some((&one - p.recip()) / denom)
}

/// Builds the exact exponent table. Requires 1 <= p <= 2.
pub fn exponents(p: &BigRational, d1: i64, d2: i64, r0: i64) -> Result<ExponentTable> {
    let one = BigRational::one();
    let two = int(2);
    if p < &one || p > &two {
        return Err(Error::ExponentRange {
            p: p.to_string(),
            lo: "1".into(),
            hi: "2".into(),
        });
    }
    if d1 < 1 || d2 < 1 || r0 < 0 || r0 > d1 {
        return Err(Error::InvalidParameter(
            "exponent table needs d1 >= 1, d2 >= 1, 0 <= r0 <= d1".into(),
        ));
    }
    let dbar1 = d1 - r0;
    let st_d1 = stein_tomas(d1);
    let st_d2 = stein_tomas(d2);
    let st_min = st_d1.clone().min(st_d2.clone());
    let st_d2_prime = stein_tomas_dual(d2);

    let p_prime = if p > &one {
        Some(p.clone() / (p - &one))
    } else {
        None
    };
    let inv_q = p.recip() - rat(1, 2);
    let q = if inv_q.is_zero() { None } else { Some(inv_q.recip()) };

    let theta_p = interpolation_parameter(p, &st_min);
    let vartheta_p = interpolation_parameter(p, &st_d2);
    let s_threshold = int(d1 + d2) * (p.recip() - rat(1, 2));
    let p_critical = critical_exponent(dbar1, d2).ok();

    // dbar1/q - vartheta d2/2 - (d2-1)/2 >= 0, with 1/q kept rational so the
    // p = 2 endpoint needs no special casing.
    let admissible = vartheta_p.as_ref().map(|theta| {
        let lhs = int(dbar1) * &inv_q - theta * rat(d2, 2) - rat(d2 - 1, 2);
        lhs >= BigRational::zero()
    });
    let admissible_dual = st_d2_prime.as_ref().map(|stp| {
        let inv_p_prime = &one - p.recip();
        let bound = int(dbar1 - (d2 - 1)) / (int(2 * dbar1) + int(d2) * stp);
        inv_p_prime <= bound
    });

    Ok(ExponentTable {
        d1,
        d2,
        r0,
        dbar1,
        p: p.clone(),
        p_prime,
        q,
        st_d1,
        st_d2,
        st_min,
        st_d2_prime,
        theta_p,
        vartheta_p,
        s_threshold,
        p_critical,
        admissible,
        admissible_dual,
    })
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64()
        .unwrap_or_else(|| r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN))
}

/// Parses "3/4", "1.25", or "2" into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let num: i64 = n
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational '{text}'")))?;
        let den: i64 = d
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational '{text}'")))?;
        if den == 0 {
            return Err(Error::Parse("rational with zero denominator".into()));
        }
        return Ok(rat(num, den));
    }
    if let Ok(i) = t.parse::<i64>() {
        return Ok(int(i));
    }
    let f: f64 = t
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational '{text}'")))?;
    BigRational::from_f64(f).ok_or_else(|| Error::Parse(format!("non-finite rational '{text}'")))
}

fn rational_json(r: &Option<BigRational>) -> Value {
    match r {
        Some(v) => json!({ "exact": v.to_string(), "decimal": rational_to_f64(v) }),
        None => Value::Null,
    }
}

impl ExponentTable {
    pub fn to_json(&self) -> Value {
        json!({
            "d1": self.d1,
            "d2": self.d2,
            "r0": self.r0,
            "dbar1": self.dbar1,
            "p": rational_json(&Some(self.p.clone())),
            "pPrime": rational_json(&self.p_prime),
            "q": rational_json(&self.q),
            "stD1": rational_json(&Some(self.st_d1.clone())),
            "stD2": rational_json(&Some(self.st_d2.clone())),
            "stMin": rational_json(&Some(self.st_min.clone())),
            "stD2Prime": rational_json(&self.st_d2_prime),
            "thetaP": rational_json(&self.theta_p),
            "varthetaP": rational_json(&self.vartheta_p),
            "sThreshold": rational_json(&Some(self.s_threshold.clone())),
            "pCritical": rational_json(&self.p_critical),
            "admissible": self.admissible,
            "admissibleDual": self.admissible_dual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_exponent_example_family() {
        // dbar1 = 2N, d2 = 3 gives 2 - 8/(N+7).
        for n in 1..=10i64 {
            let got = critical_exponent(2 * n, 3).unwrap();
            let expected = int(2) - rat(8, n + 7);
            assert_eq!(got, expected, "N = {n}");
        }
        assert_eq!(critical_exponent(4, 3).unwrap(), rat(10, 9));
    }

    #[test]
    fn critical_exponent_limiting_case_is_one() {
        for d2 in 2..=8i64 {
            assert_eq!(critical_exponent(d2 - 1, d2).unwrap(), BigRational::one());
        }
    }

    #[test]
    fn critical_exponent_condition_enforced() {
        let err = critical_exponent(1, 3).unwrap_err();
        assert!(matches!(err, Error::ExponentCondition { dbar1: 1, d2: 3 }));
    }

    #[test]
    fn printed_variant_differs() {
        // The printed variant does not reproduce the worked example value.
        let printed = critical_exponent_variant(4, 3, true).unwrap();
        assert_eq!(printed, rat(8 + 24, 8 + 28));
        assert_ne!(printed, critical_exponent(4, 3).unwrap());
    }

    #[test]
    fn critical_exponent_monotone_in_dbar1() {
        for d2 in 2..=4i64 {
            let mut prev = critical_exponent(d2 - 1, d2).unwrap();
            for dbar1 in d2..=(d2 + 50) {
                let next = critical_exponent(dbar1, d2).unwrap();
                assert!(next >= prev);
                prev = next;
            }
        }
    }

    #[test]
    fn stein_tomas_values() {
        assert_eq!(stein_tomas(3), rat(4, 3));
        assert_eq!(stein_tomas_dual(3), Some(rat(4, 1)));
        assert_eq!(stein_tomas_dual(1), None);
    }

    #[test]
    fn endpoint_p_equals_one() {
        let t = exponents(&BigRational::one(), 6, 3, 2).unwrap();
        assert_eq!(t.theta_p, Some(BigRational::zero()));
        assert_eq!(t.vartheta_p, Some(BigRational::zero()));
        assert_eq!(t.s_threshold, rat(9, 2));
        assert!(t.p_prime.is_none());
        assert_eq!(t.q, Some(rat(2, 1)));
        assert_eq!(t.admissible, Some(true));
        assert_eq!(t.admissible, t.admissible_dual);
    }

    #[test]
    fn critical_p_saturates_condition() {
        // At p = pCritical(dbar1 = 4, d2 = 3) = 10/9 the admissibility
        // condition holds with equality; the dual form must agree.
        let p = rat(10, 9);
        let t = exponents(&p, 6, 3, 2).unwrap();
        assert_eq!(t.dbar1, 4);
        assert_eq!(t.p_critical, Some(rat(10, 9)));
        assert_eq!(t.admissible, Some(true));
        assert_eq!(t.admissible_dual, Some(true));
        let lhs = int(t.dbar1) * (p.recip() - rat(1, 2))
            - t.vartheta_p.clone().unwrap() * rat(3, 2)
            - rat(1, 1);
        assert!(lhs.is_zero(), "saturation: lhs = {lhs}");

        // Slightly above the critical exponent the condition fails, and the
        // dual form fails with it.
        let p_above = &p + rat(1, 1000);
        let t2 = exponents(&p_above, 6, 3, 2).unwrap();
        assert_eq!(t2.admissible, Some(false));
        assert_eq!(t2.admissible_dual, Some(false));
    }

    #[test]
    fn theta_matches_dual_formula() {
        // theta_p = ST(d2)'/p' whenever ST(d2) = ST(d1, d2).
        let p = rat(9, 8);
        let t = exponents(&p, 6, 3, 2).unwrap();
        assert_eq!(t.st_min, t.st_d2);
        let inv_p_prime = BigRational::one() - p.recip();
        assert_eq!(
            t.theta_p.unwrap(),
            t.st_d2_prime.unwrap() * inv_p_prime
        );
    }

    #[test]
    fn exponent_range_enforced() {
        assert!(exponents(&rat(5, 2), 4, 2, 0).is_err());
        assert!(exponents(&rat(1, 2), 4, 2, 0).is_err());
    }

    #[test]
    fn d2_equals_one_leaves_dual_fields_undefined() {
        let t = exponents(&rat(6, 5), 4, 1, 0).unwrap();
        assert!(t.st_d2_prime.is_none());
        assert!(t.admissible_dual.is_none());
        // ST(1) = 1 makes the interpolation parameters degenerate.
        assert!(t.vartheta_p.is_none());
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("10/9").unwrap(), rat(10, 9));
        assert_eq!(parse_rational("2").unwrap(), int(2));
        assert_eq!(parse_rational("1.25").unwrap(), rat(5, 4));
        assert!(parse_rational("x").is_err());
    }
}
