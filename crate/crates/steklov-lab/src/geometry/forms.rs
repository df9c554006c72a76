use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Closed-form conformal factor families with exact first and second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FactorForm {
    Constant {
        value: f64,
    },
    /// `a + b x`
    Affine {
        a: f64,
        b: f64,
    },
    /// `base + amp · exp(−(x − center)² / (2 width²))`
    GaussianBump {
        #[serde(default = "one")]
        base: f64,
        amp: f64,
        center: f64,
        width: f64,
    },
    /// `a0 + Σ a_k cos(kπx) + b_k sin(kπx)`, k starting at 1.
    Fourier {
        a0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// Monomial polynomial `Σ c_k x^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `scale · exp(rate · x)`
    Exponential {
        scale: f64,
        rate: f64,
    },
    /// `amp · exp(1 − 1/(1 − r²))` with `r = (x − center)/radius`, zero outside |r| < 1.
    CompactBump {
        amp: f64,
        center: f64,
        radius: f64,
    },
    Sum {
        terms: Vec<FactorForm>,
    },
    /// `inner(1 − x)`
    Reflected {
        inner: Box<FactorForm>,
    },
}

fn one() -> f64 {
    1.0
}

impl FactorForm {
    /// Value, first and second derivative at x.
    pub fn jet(&self, x: f64) -> [f64; 3] {
        match self {
            FactorForm::Constant { value } => [*value, 0.0, 0.0],
            FactorForm::Affine { a, b } => [a + b * x, *b, 0.0],
            FactorForm::GaussianBump {
                base,
                amp,
                center,
                width,
            } => {
                let d = x - center;
                let w2 = width * width;
                let e = amp * (-d * d / (2.0 * w2)).exp();
                [base + e, -d / w2 * e, (d * d / (w2 * w2) - 1.0 / w2) * e]
            }
            FactorForm::Fourier { a0, cos, sin } => {
                let mut v = [*a0, 0.0, 0.0];
                for (k, &a) in cos.iter().enumerate() {
                    let w = (k + 1) as f64 * PI;
                    let (s, c) = (w * x).sin_cos();
                    v[0] += a * c;
                    v[1] -= a * w * s;
                    v[2] -= a * w * w * c;
                }
                for (k, &b) in sin.iter().enumerate() {
                    let w = (k + 1) as f64 * PI;
                    let (s, c) = (w * x).sin_cos();
                    v[0] += b * s;
                    v[1] += b * w * c;
                    v[2] -= b * w * w * s;
                }
                v
            }
            FactorForm::Polynomial { coeffs } => {
                let mut v = [0.0; 3];
                for &c in coeffs.iter().rev() {
                    v[2] = v[2] * x + 2.0 * v[1];
                    v[1] = v[1] * x + v[0];
                    v[0] = v[0] * x + c;
                }
                v
            }
            FactorForm::Exponential { scale, rate } => {
                let e = scale * (rate * x).exp();
                [e, rate * e, rate * rate * e]
            }
            FactorForm::CompactBump {
                amp,
                center,
                radius,
            } => {
                let r = (x - center) / radius;
                if r.abs() >= 1.0 {
                    return [0.0; 3];
                }
                let s = 1.0 - r * r;
                let e = amp * (1.0 - 1.0 / s).exp();
                // φ = 1 − 1/s, φ' = −2r/s², φ'' = −2/s² − 8r²/s³ (in r)
                let p1 = -2.0 * r / (s * s);
                let p2 = -2.0 / (s * s) - 8.0 * r * r / (s * s * s);
                [e, e * p1 / radius, e * (p1 * p1 + p2) / (radius * radius)]
            }
            FactorForm::Sum { terms } => terms.iter().fold([0.0; 3], |acc, t| {
                let j = t.jet(x);
                [acc[0] + j[0], acc[1] + j[1], acc[2] + j[2]]
            }),
            FactorForm::Reflected { inner } => {
                let j = inner.jet(1.0 - x);
                [j[0], -j[1], j[2]]
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x)[0]
    }

    pub fn reflected(&self) -> FactorForm {
        match self {
            FactorForm::Reflected { inner } => (**inner).clone(),
            FactorForm::Constant { .. } => self.clone(),
            other => FactorForm::Reflected {
                inner: Box::new(other.clone()),
            },
        }
    }

    /// True when the form is analytic on [0, 1] so a Chebyshev series resolves it.
    pub fn is_analytic(&self) -> bool {
        match self {
            FactorForm::CompactBump { .. } => false,
            FactorForm::Sum { terms } => terms.iter().all(|t| t.is_analytic()),
            FactorForm::Reflected { inner } => inner.is_analytic(),
            _ => true,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            FactorForm::Constant { .. } => "constant".into(),
            FactorForm::Affine { .. } => "affine".into(),
            FactorForm::GaussianBump { .. } => "gaussian-bump".into(),
            FactorForm::Fourier { .. } => "fourier".into(),
            FactorForm::Polynomial { .. } => "polynomial".into(),
            FactorForm::Exponential { .. } => "exponential".into(),
            FactorForm::CompactBump { .. } => "compact-bump".into(),
            FactorForm::Sum { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| t.tag()).collect();
                format!("sum({})", parts.join("+"))
            }
            FactorForm::Reflected { inner } => format!("reflected({})", inner.tag()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(f: &FactorForm, xs: &[f64]) {
        let h = 1e-4;
        for &x in xs {
            let j = f.jet(x);
            let d1 = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
            let d2 = (f.value(x + h) - 2.0 * j[0] + f.value(x - h)) / (h * h);
            let s = 1.0 + j[1].abs() + j[2].abs();
            assert!((d1 - j[1]).abs() < 1e-6 * s, "{f:?} d1 at {x}");
            assert!((d2 - j[2]).abs() < 1e-4 * s, "{f:?} d2 at {x}");
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let xs = [0.1, 0.37, 0.5, 0.81];
        check_derivatives(&FactorForm::Affine { a: 1.0, b: 0.5 }, &xs);
        check_derivatives(
            &FactorForm::GaussianBump {
                base: 1.0,
                amp: 0.3,
                center: 0.4,
                width: 0.1,
            },
            &xs,
        );
        check_derivatives(
            &FactorForm::Fourier {
                a0: 2.0,
                cos: vec![0.1, 0.2],
                sin: vec![0.05],
            },
            &xs,
        );
        check_derivatives(
            &FactorForm::Polynomial {
                coeffs: vec![1.0, 0.0, 0.25, -0.1],
            },
            &xs,
        );
        check_derivatives(
            &FactorForm::Exponential {
                scale: 1.0,
                rate: 1.0,
            },
            &xs,
        );
        check_derivatives(
            &FactorForm::CompactBump {
                amp: 0.2,
                center: 0.3,
                radius: 0.25,
            },
            &xs,
        );
        let r = FactorForm::Exponential {
            scale: 1.0,
            rate: 1.0,
        }
        .reflected();
        check_derivatives(&r, &xs);
    }

    #[test]
    fn polynomial_jet_exact() {
        let p = FactorForm::Polynomial {
            coeffs: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(p.jet(2.0), [17.0, 14.0, 6.0]);
    }

    #[test]
    fn reflection_round_trip() {
        let f = FactorForm::Affine { a: 0.0, b: 1.0 };
        assert_eq!(f.reflected().reflected(), f);
        assert!((f.reflected().value(0.3) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn parses_tagged_json() {
        let f: FactorForm =
            serde_json::from_str(r#"{"kind":"gaussian-bump","amp":0.2,"center":0.5,"width":0.1}"#)
                .unwrap();
        assert_eq!(f.value(0.5), 1.2);
    }
}
