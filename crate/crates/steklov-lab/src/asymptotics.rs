//! Simon's recursive large-z expansion of M and N, the endpoint-derivative
//! equivalence test, and eigenvalue asymptotes.

use crate::error::{LabError, Result};
use crate::geometry::{first_endpoint_mismatch, ChebSeries, ConformalFactor, Potential};
use serde::{Deserialize, Serialize};

pub const MAX_ORDER: usize = 10;
pub const DEFAULT_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Minus,
    Plus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub betas: Vec<ChebSeries>,
    pub gammas: Vec<ChebSeries>,
    pub order_b: usize,
}

impl ExpansionCoefficients {
    pub fn beta_at_zero(&self) -> Vec<f64> {
        self.betas.iter().map(|b| b.eval(0.0)).collect()
    }

    pub fn gamma_at_zero(&self) -> Vec<f64> {
        self.gammas.iter().map(|g| g.eval(0.0)).collect()
    }
}

fn recursion(q: &ChebSeries, order: usize) -> Vec<ChebSeries> {
    let degree = q.degree();
    let mut betas = vec![q.scale(0.5)];
    for j in 0..order {
        // Riccati for −M = t + w: 2t w = q + w' − w²
        let mut next = betas[j].derivative().scale(0.5);
        for l in 0..j {
            next = next.add(
                &betas[l]
                    .mul_truncated(&betas[j - 1 - l], degree)
                    .scale(-0.5),
            );
        }
        betas.push(next);
    }
    betas
}

/// β_j from q and γ_j from q ∘ η, j = 0..=B.
pub fn simon_coefficients(q: &Potential, order_b: usize) -> Result<ExpansionCoefficients> {
    if order_b > MAX_ORDER {
        return Err(LabError::Order(order_b));
    }
    if !q.series_resolved {
        return Err(LabError::Resolution {
            tail_ratio: q.series.tail_ratio(),
            limit: 1e-8,
            degree: q.series.degree(),
        });
    }
    Ok(ExpansionCoefficients {
        betas: recursion(&q.series, order_b),
        gammas: recursion(&q.series.reflect(), order_b),
        order_b,
    })
}

/// (M, N) ≈ (−t − Σ β_j(0)/t^{j+1}, −t − Σ γ_j(0)/t^{j+1}) at z = t².
pub fn asymptotic_weyl(c: &ExpansionCoefficients, t: f64, order_b: usize) -> (f64, f64) {
    let b = order_b.min(c.order_b);
    let mut m = -t;
    let mut n = -t;
    let mut tp = t;
    for j in 0..=b {
        m -= c.betas[j].eval(0.0) / tp;
        n -= c.gammas[j].eval(0.0) / tp;
        tp *= t;
    }
    (m, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Least k with q^{(k)}(0) ≠ (−1)^k q^{(k)}(1).
    pub first_k: Option<usize>,
    /// β_k(0) − γ_k(0) for k = 0..=B.
    pub beta_gamma_gap: Vec<f64>,
    /// Least k where the gap exceeds its tolerance.
    pub first_gap_k: Option<usize>,
    /// Whether both tests agree on the first mismatch.
    pub consistent: bool,
}

pub fn endpoint_equivalence_test(q: &Potential, order_b: usize) -> Result<EquivalenceReport> {
    let c = simon_coefficients(q, order_b)?;
    let first_k = first_endpoint_mismatch(q, order_b, 1e-7);
    let bz = c.beta_at_zero();
    let gz = c.gamma_at_zero();
    let beta_gamma_gap: Vec<f64> = bz.iter().zip(&gz).map(|(b, g)| b - g).collect();
    let first_gap_k = beta_gamma_gap.iter().enumerate().position(|(k, g)| {
        let scale = 1.0 + bz[k].abs().max(gz[k].abs());
        g.abs() > 1e-6 * scale
    });
    Ok(EquivalenceReport {
        first_k,
        consistent: first_k == first_gap_k,
        beta_gamma_gap,
        first_gap_k,
    })
}

/// Leading eigenvalue asymptote for branch − (x = 1 side) or + (x = 0 side).
pub fn eigenvalue_asymptote(f: &ConformalFactor, n: u32, m: u32, sign: Branch) -> f64 {
    let (x, s) = match sign {
        Branch::Minus => (1.0, -1.0),
        Branch::Plus => (0.0, 1.0),
    };
    let [fx, dfx, _] = f.jet(x);
    let r = fx.sqrt();
    // (ln h)' = (n − 2) f'/f
    let log_h_prime = (n as f64 - 2.0) * dfx / fx;
    m as f64 / r + (n as f64 - 2.0) / (2.0 * r) + s * log_h_prime / (4.0 * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FactorForm, DEFAULT_DEGREE};

    #[test]
    fn constant_potential_recursion() {
        let c = 0.7;
        let q = Potential::constant(c);
        let e = simon_coefficients(&q, 6).unwrap();
        let mut b = vec![c / 2.0];
        for j in 0..6 {
            let s: f64 = (0..j).map(|l| b[l] * b[j - 1 - l]).sum();
            b.push(-0.5 * s);
        }
        for (x, y) in e.beta_at_zero().iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // √(t² + c) = t + c/2t − c²/8t³ + c³/16t⁵ − …
        assert_eq!(b[1], 0.0);
        assert!((b[2] + c * c / 8.0).abs() < 1e-15);
        assert!((b[4] - c * c * c / 16.0).abs() < 1e-15);
    }

    #[test]
    fn linear_potential_beta_one() {
        let q = Potential::from_fn(|x| x, 16).unwrap();
        let e = simon_coefficients(&q, 2).unwrap();
        for &x in &[0.0, 0.4, 1.0] {
            assert!((e.betas[1].eval(x) - 0.25).abs() < 1e-13);
            assert!((e.betas[2].eval(x) + x * x / 8.0).abs() < 1e-13);
        }
        let r = endpoint_equivalence_test(&q, 4).unwrap();
        assert_eq!(r.first_k, Some(0));
        assert!((r.beta_gamma_gap[0] + 0.5).abs() < 1e-14);
        assert!(r.consistent);
    }

    #[test]
    fn weyl_expansion_values() {
        let e = simon_coefficients(&Potential::constant(1.0), 2).unwrap();
        let (m, _) = asymptotic_weyl(&e, 10.0, 2);
        assert!((m + 10.049875).abs() < 1e-12);
        assert_eq!(
            asymptotic_weyl(
                &simon_coefficients(&Potential::constant(0.0), 3).unwrap(),
                5.0,
                3
            )
            .0,
            -5.0
        );
    }

    #[test]
    fn order_limit() {
        assert_eq!(
            simon_coefficients(&Potential::constant(0.0), 11),
            Err(LabError::Order(11))
        );
    }

    #[test]
    fn asymptote_examples() {
        let four = ConformalFactor::from_form(FactorForm::Constant { value: 4.0 }, DEFAULT_DEGREE)
            .unwrap();
        assert!((eigenvalue_asymptote(&four, 3, 10, Branch::Minus) - 5.25).abs() < 1e-14);
        let one = ConformalFactor::constant(1.0).unwrap();
        assert_eq!(eigenvalue_asymptote(&one, 5, 7, Branch::Plus), 8.5);
    }
}
