//! Double-double arithmetic: an unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_3e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = self.hi.sqrt();
        // one Newton step in dd: x + (a − x²)/(2x)
        let (p, e) = two_prod(x, x);
        let r = (self - Dd { hi: p, lo: e }).to_f64() / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, r);
        Dd { hi, lo }
    }

    pub fn exp(self) -> Self {
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * k).scale_pow2(-10);
        // Taylor series of e^r − 1 on |r| ≤ ln2/2048
        let mut term = r;
        let mut sum = r;
        for i in 2..=12 {
            term = term * r / (i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        // (1 + s)² − 1 = s(2 + s), applied ten times
        for _ in 0..10 {
            sum = sum * (sum + 2.0);
        }
        (sum + 1.0).scale_pow2(k as i32)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::new(f64::NAN);
        }
        let y = Dd::new(self.hi.ln());
        // Newton on e^y = a: y + a e^{−y} − 1
        let y = y + self * (-y).exp() - 1.0;
        y + self * (-y).exp() - 1.0
    }

    /// x^p for x > 0 as exp(p ln x); 0^p = 0 for p > 0 and 1 for p = 0.
    pub fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Dd::ONE;
        }
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            let mut acc = Dd::ONE;
            let mut base = self;
            let mut e = p.abs() as u32;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc * base;
                }
                base = base * base;
                e >>= 1;
            }
            return if p < 0.0 { Dd::ONE / acc } else { acc };
        }
        (self.ln() * p).exp()
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd::new(v)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, o: f64) -> Dd {
        let (s, e) = two_sum(self.hi, o);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, o: f64) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, o: f64) -> Dd {
        let (p, e) = two_prod(self.hi, o);
        let (hi, lo) = quick_two_sum(p, e + self.lo * o);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * q1;
        let q2 = r.hi / o.hi;
        let r = r - o * q2;
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, o: f64) -> Dd {
        self / Dd::new(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_third() {
        let t = Dd::ONE / Dd::new(3.0);
        let back = t * 3.0 - 1.0;
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_ln_round_trip() {
        for &x in &[1e-5, 0.3, 0.5, 0.999, 1.0, 7.5] {
            let d = Dd::new(x);
            let r = d.ln().exp() - d;
            assert!(
                r.to_f64().abs() < 1e-30 * x.max(1.0),
                "{x}: {:e}",
                r.to_f64()
            );
        }
        let e = Dd::ONE.exp();
        assert!((e.hi - std::f64::consts::E).abs() < 1e-15);
        // e = 2.718281828459045 + 1.4456468917292502e−16
        assert!((e.lo - 1.4456468917292502e-16).abs() < 1e-30);
    }

    #[test]
    fn powers() {
        let h = Dd::new(0.5);
        assert_eq!(h.powf(1.0).to_f64(), 0.5);
        assert_eq!(h.powf(10.0).to_f64(), 0.5f64.powi(10));
        let p = Dd::new(0.3).powf(2.5).to_f64();
        assert!((p / 0.3f64.powf(2.5) - 1.0).abs() < 1e-15);
        let s = Dd::new(2.0).sqrt();
        assert!((s * s - 2.0).to_f64().abs() < 1e-31);
    }
}
