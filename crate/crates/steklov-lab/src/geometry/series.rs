use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Chebyshev series on [0, 1]: `f(x) = Σ c_k T_k(2x − 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebSeries {
    pub coeffs: Vec<f64>,
}

impl ChebSeries {
    pub fn zero(degree: usize) -> Self {
        ChebSeries {
            coeffs: vec![0.0; degree + 1],
        }
    }

    pub fn constant(c: f64, degree: usize) -> Self {
        let mut s = Self::zero(degree);
        s.coeffs[0] = c;
        s
    }

    /// Interpolates `f` at the Chebyshev–Gauss points of the given degree.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, degree: usize) -> Self {
        let n = degree + 1;
        let samples: Vec<f64> = (0..n)
            .map(|j| {
                let s = (PI * (j as f64 + 0.5) / n as f64).cos();
                f(0.5 * (s + 1.0))
            })
            .collect();
        let mut coeffs = vec![0.0; n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, v) in samples.iter().enumerate() {
                acc += v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
            }
            *c = 2.0 * acc / n as f64;
        }
        coeffs[0] *= 0.5;
        ChebSeries { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Clenshaw evaluation at x ∈ [0, 1].
    pub fn eval(&self, x: f64) -> f64 {
        let s = 2.0 * x - 1.0;
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + self.coeffs[0]
    }

    /// d/dx of the series (degree kept, top coefficient becomes zero).
    pub fn derivative(&self) -> Self {
        let n = self.coeffs.len();
        let mut d = vec![0.0; n];
        if n > 1 {
            let mut e = vec![0.0; n + 1];
            for k in (1..n).rev() {
                e[k - 1] = e[k + 1] + 2.0 * k as f64 * self.coeffs[k];
            }
            e[0] *= 0.5;
            for k in 0..n {
                d[k] = 2.0 * e[k];
            }
        }
        ChebSeries { coeffs: d }
    }

    pub fn nth_derivative(&self, k: usize) -> Self {
        let mut s = self.clone();
        for _ in 0..k {
            s = s.derivative();
        }
        s
    }

    /// Antiderivative vanishing at x = 0.
    pub fn antiderivative(&self) -> Self {
        let c = &self.coeffs;
        let n = c.len();
        let get = |k: usize| if k < n { c[k] } else { 0.0 };
        let mut out = vec![0.0; n + 1];
        for k in 1..=n {
            out[k] = if k == 1 {
                get(0) - 0.5 * get(2)
            } else {
                (get(k - 1) - get(k + 1)) / (2.0 * k as f64)
            };
            out[k] *= 0.5;
        }
        let mut s = ChebSeries { coeffs: out };
        let v0 = s.eval(0.0);
        s.coeffs[0] -= v0;
        s
    }

    /// g(x) = f(1 − x).
    pub fn reflect(&self) -> Self {
        ChebSeries {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
                .collect(),
        }
    }

    /// Product truncated to `degree`, using T_i T_j = (T_{i+j} + T_{|i−j|})/2.
    pub fn mul_truncated(&self, other: &Self, degree: usize) -> Self {
        let mut out = vec![0.0; degree + 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                let p = 0.5 * a * b;
                if i + j <= degree {
                    out[i + j] += p;
                }
                let d = i.abs_diff(j);
                if d <= degree {
                    out[d] += p;
                }
            }
        }
        ChebSeries { coeffs: out }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(0.0)
                    + other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        ChebSeries { coeffs }
    }

    pub fn scale(&self, a: f64) -> Self {
        ChebSeries {
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// Largest of the last four coefficient magnitudes relative to the largest one.
    pub fn tail_ratio(&self) -> f64 {
        let max = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if max == 0.0 {
            return 0.0;
        }
        let n = self.coeffs.len();
        let tail = self.coeffs[n.saturating_sub(4)..]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()));
        tail / max
    }

    /// Zeroes coefficients below `rel · max|c|` (interpolation noise).
    pub fn chopped(mut self, rel: f64) -> Self {
        let max = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for c in self.coeffs.iter_mut() {
            if c.abs() < rel * max {
                *c = 0.0;
            }
        }
        self
    }

    pub fn sup_on_grid(&self, points: usize) -> f64 {
        (0..=points)
            .map(|k| self.eval(k as f64 / points as f64).abs())
            .fold(0.0, f64::max)
    }
}
