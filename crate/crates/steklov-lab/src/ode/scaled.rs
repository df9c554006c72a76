use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul, Neg};

/// Real number stored as `mantissa · e^{log_scale}` with |mantissa| ∈ [1, 2) or 0.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    pub mantissa: f64,
    pub log_scale: f64,
}

const ALIGN_LIMIT: f64 = 700.0;

impl ScaledValue {
    pub const ZERO: ScaledValue = ScaledValue {
        mantissa: 0.0,
        log_scale: 0.0,
    };
    pub const ONE: ScaledValue = ScaledValue {
        mantissa: 1.0,
        log_scale: 0.0,
    };

    /// `value · e^{log_scale}`, normalised.
    pub fn new(value: f64, log_scale: f64) -> Self {
        if value == 0.0 || !value.is_finite() {
            return ScaledValue {
                mantissa: if value.is_nan() { f64::NAN } else { 0.0 },
                log_scale: 0.0,
            };
        }
        let a = value.abs();
        let k = a.log2().floor();
        let mut m = a / k.exp2();
        let mut kk = k;
        if m >= 2.0 {
            m /= 2.0;
            kk += 1.0;
        } else if m < 1.0 {
            m *= 2.0;
            kk -= 1.0;
        }
        ScaledValue {
            mantissa: m.copysign(value),
            log_scale: log_scale + kk * std::f64::consts::LN_2,
        }
    }

    pub fn from_f64(v: f64) -> Self {
        Self::new(v, 0.0)
    }

    /// sign · e^{ln_abs}.
    pub fn from_log(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 || ln_abs == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        Self::new(sign.signum(), ln_abs)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn signum(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    pub fn ln_abs(&self) -> f64 {
        if self.mantissa == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.mantissa.abs().ln() + self.log_scale
        }
    }

    /// Plain double; saturates to ±∞ or 0 outside the representable range.
    pub fn to_f64(&self) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        self.mantissa * self.log_scale.exp()
    }

    pub fn abs(&self) -> Self {
        ScaledValue {
            mantissa: self.mantissa.abs(),
            log_scale: self.log_scale,
        }
    }

    pub fn recip(&self) -> Self {
        Self::ONE / *self
    }

    pub fn powf(&self, p: f64) -> Self {
        assert!(
            self.mantissa > 0.0 || p.fract() == 0.0,
            "fractional power of a negative value"
        );
        let sign = if self.mantissa < 0.0 && (p as i64) % 2 != 0 {
            -1.0
        } else {
            1.0
        };
        Self::from_log(sign, p * self.ln_abs())
    }

    /// Sum after alignment; when the scales differ by more than 700 the smaller term is dropped.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.log_scale >= other.log_scale {
            (self, other)
        } else {
            (other, self)
        };
        let d = small.log_scale - big.log_scale;
        if d < -ALIGN_LIMIT {
            return *big;
        }
        Self::new(big.mantissa + small.mantissa * d.exp(), big.log_scale)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&-*other)
    }

    /// |a − b| / |b| computed without leaving log space.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let d = self.sub(other);
        if d.is_zero() {
            return 0.0;
        }
        (d.ln_abs() - other.ln_abs()).exp()
    }

    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        self.ln_abs()
            .partial_cmp(&other.ln_abs())
            .unwrap_or(Ordering::Equal)
    }
}

impl Mul for ScaledValue {
    type Output = ScaledValue;
    fn mul(self, rhs: ScaledValue) -> ScaledValue {
        ScaledValue::new(self.mantissa * rhs.mantissa, self.log_scale + rhs.log_scale)
    }
}

impl Mul<f64> for ScaledValue {
    type Output = ScaledValue;
    fn mul(self, rhs: f64) -> ScaledValue {
        ScaledValue::new(self.mantissa * rhs, self.log_scale)
    }
}

impl Div for ScaledValue {
    type Output = ScaledValue;
    fn div(self, rhs: ScaledValue) -> ScaledValue {
        ScaledValue::new(self.mantissa / rhs.mantissa, self.log_scale - rhs.log_scale)
    }
}

impl Neg for ScaledValue {
    type Output = ScaledValue;
    fn neg(self) -> ScaledValue {
        ScaledValue {
            mantissa: -self.mantissa,
            log_scale: self.log_scale,
        }
    }
}

impl fmt::Debug for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}·e^{}", self.mantissa, self.log_scale)
    }
}

impl fmt::Display for ScaledValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_f64();
        if v.is_finite() && v != 0.0 || self.is_zero() {
            write!(f, "{v:e}")
        } else {
            let l10 = self.ln_abs() / std::f64::consts::LN_10;
            let e = l10.floor();
            write!(
                f,
                "{}{}e{}",
                if self.mantissa < 0.0 { "-" } else { "" },
                10f64.powf(l10 - e),
                e
            )
        }
    }
}

/// Running sum of signed terms given as (sign, ln|term|), combined by max-alignment.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogSum {
    acc: Option<ScaledValue>,
}

impl LogSum {
    pub fn new() -> Self {
        LogSum { acc: None }
    }

    pub fn push(&mut self, term: ScaledValue) {
        self.acc = Some(match self.acc {
            None => term,
            Some(a) => a.add(&term),
        });
    }

    pub fn push_log(&mut self, sign: f64, ln_abs: f64) {
        self.push(ScaledValue::from_log(sign, ln_abs));
    }

    pub fn value(&self) -> ScaledValue {
        self.acc.unwrap_or(ScaledValue::ZERO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation() {
        for &v in &[1.0, 1.5, 3.0, -7.25, 1e-300, 1e300] {
            let s = ScaledValue::from_f64(v);
            assert!(s.mantissa.abs() >= 1.0 && s.mantissa.abs() < 2.0);
            assert!((s.to_f64() - v).abs() <= 1e-12 * v.abs());
        }
    }

    #[test]
    fn arithmetic_beyond_double_range() {
        let a = ScaledValue::from_log(1.0, 5000.0);
        let b = ScaledValue::from_log(-1.0, 4999.0);
        let p = a * b;
        assert!((p.ln_abs() - 9999.0).abs() < 1e-12);
        assert_eq!(p.signum(), -1.0);
        let s = a.add(&b);
        assert!((s.ln_abs() - (5000.0 + (1.0 - (-1.0f64).exp()).ln())).abs() < 1e-12);
        let q = a / b;
        assert!((q.to_f64() + 1.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn add_drops_negligible_terms() {
        let a = ScaledValue::from_log(1.0, 1000.0);
        let b = ScaledValue::from_log(1.0, 100.0);
        assert_eq!(a.add(&b), a);
    }

    #[test]
    fn cancellation_to_zero() {
        let a = ScaledValue::from_f64(3.0);
        assert!(a.sub(&a).is_zero());
    }
}
