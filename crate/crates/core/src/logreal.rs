//! Positive reals stored by their natural logarithm.

use std::cmp::Ordering;
use std::fmt;

/// `ln(1 − e^d)` for `d < 0`, accurate at both ends of the range.
pub fn ln_one_minus_exp(d: f64) -> f64 {
    debug_assert!(d <= 0.0);
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sinh u)` for `u > 0`.
pub fn ln_sinh(u: f64) -> f64 {
    if u < 20.0 {
        u.sinh().ln()
    } else {
        u - std::f64::consts::LN_2 + (-(-2.0 * u).exp()).ln_1p()
    }
}

/// `ln(cosh u)`.
pub fn ln_cosh(u: f64) -> f64 {
    let u = u.abs();
    if u < 20.0 {
        u.cosh().ln()
    } else {
        u - std::f64::consts::LN_2 + (-2.0 * u).exp().ln_1p()
    }
}

/// A positive real `v`, stored as `ln v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogReal {
    ln: f64,
}

// Named like the operator traits on purpose: the arithmetic is on logarithms
// and should read as explicit method calls.
#[allow(clippy::should_implement_trait)]
impl LogReal {
    pub const ONE: LogReal = LogReal { ln: 0.0 };

    pub fn from_ln(ln: f64) -> Self {
        LogReal { ln }
    }

    /// `None` unless `v > 0`.
    pub fn from_value(v: f64) -> Option<Self> {
        (v > 0.0).then(|| LogReal { ln: v.ln() })
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    /// The ordinary value; overflows to `+∞` past `ln ≈ 709.78`.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    pub fn mul(self, other: Self) -> Self {
        LogReal {
            ln: self.ln + other.ln,
        }
    }

    pub fn div(self, other: Self) -> Self {
        LogReal {
            ln: self.ln - other.ln,
        }
    }

    pub fn add(self, other: Self) -> Self {
        LogReal {
            ln: ln_add_exp(self.ln, other.ln),
        }
    }

    /// `self − other`, if positive.
    pub fn checked_sub(self, other: Self) -> Option<Self> {
        (other.ln < self.ln).then(|| LogReal {
            ln: self.ln + ln_one_minus_exp(other.ln - self.ln),
        })
    }

    pub fn powf(self, e: f64) -> Self {
        LogReal { ln: self.ln * e }
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln.partial_cmp(&other.ln)
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ln.abs() <= 700.0 {
            write!(f, "{}", self.value())
        } else {
            let log10 = self.ln / std::f64::consts::LN_10;
            let exp = log10.floor();
            write!(f, "{:.6}e{}", 10f64.powf(log10 - exp), exp as i64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_in_range() {
        for &v in &[1e-300, 1e-5, 0.3, 1.0, 2.5, 1e10, 1e300] {
            let r = LogReal::from_value(v).unwrap();
            assert!(((r.value() - v) / v).abs() < 1e-13, "{v}");
        }
        assert!(LogReal::from_value(0.0).is_none());
        assert!(LogReal::from_value(-1.0).is_none());
    }

    #[test]
    fn arithmetic_beyond_f64() {
        let big = LogReal::from_ln(2000.0);
        let two = LogReal::from_value(2.0).unwrap();
        let prod = big.mul(two);
        assert!((prod.ln() - (2000.0 + 2f64.ln())).abs() < 1e-12);
        let diff = prod.checked_sub(big).unwrap();
        assert!((diff.ln() - 2000.0).abs() < 1e-12);
        assert!(big.checked_sub(prod).is_none());
        assert!((big.add(big).ln() - (2000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn small_differences_keep_precision() {
        let a = LogReal::from_value(1.0 + 1e-9).unwrap();
        let b = LogReal::ONE;
        let d = a.checked_sub(b).unwrap().value();
        assert!((d - 1e-9).abs() / 1e-9 < 1e-6);
    }

    #[test]
    fn helpers() {
        assert!((ln_one_minus_exp(-1e-12) - (1e-12f64).ln()).abs() < 1e-9);
        assert!((ln_one_minus_exp(-40.0) + (-40f64).exp()).abs() < 1e-30);
        assert!((ln_sinh(30.0) - 30f64.sinh().ln()).abs() < 1e-12);
        assert!((ln_cosh(-25.0) - 25f64.cosh().ln()).abs() < 1e-12);
        assert!((ln_sinh(1e-8) - (1e-8f64).ln()).abs() < 1e-12);
    }
}
