//! Block-diagonal Dirichlet-to-Neumann map, Steklov spectra with sphere
//! multiplicities, and Calderón operator-norm differences.

use crate::error::{LabError, Result};
use crate::geometry::{potential_from_factor, ConformalFactor, Potential};
use crate::numerics::linear_fit;
use crate::ode::{weyl_functions, ScaledValue};
use crate::par;
use serde::{Deserialize, Serialize};

/// κ_m = m(m + n − 2).
pub fn kappa(n: u32, m: u32) -> f64 {
    m as f64 * (m as f64 + n as f64 - 2.0)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Dimension of degree-m spherical harmonics on S^{n−1}.
pub fn multiplicity(n: u32, m: u32) -> u128 {
    if m == 0 {
        return 1;
    }
    if n == 2 {
        return 2;
    }
    let (n, m) = (n as u128, m as u128);
    (2 * m + n - 2) * binomial(m + n - 3, m) / (n - 2)
}

pub fn sphere_eigenvalues(n: u32, m_max: u32) -> Vec<(f64, u128)> {
    (0..=m_max)
        .map(|m| (kappa(n, m), multiplicity(n, m)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DNBlock {
    pub mu: f64,
    pub entries: [[f64; 2]; 2],
    /// Off-diagonal entries before collapsing to doubles.
    pub off_upper: ScaledValue,
    pub off_lower: ScaledValue,
    /// ln of the off-diagonal product.
    pub log_offprod: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub m_weyl: f64,
    pub n_weyl: f64,
    pub delta: ScaledValue,
}

impl DNBlock {
    /// Eigenvalues attached to the x = 0 and x = 1 ends: the one nearer each diagonal entry.
    pub fn end_eigenvalues(&self) -> (f64, f64) {
        let a = self.entries[0][0];
        let d = self.entries[1][1];
        if (self.lambda_plus - a).abs() + (self.lambda_minus - d).abs()
            <= (self.lambda_minus - a).abs() + (self.lambda_plus - d).abs()
        {
            (self.lambda_plus, self.lambda_minus)
        } else {
            (self.lambda_minus, self.lambda_plus)
        }
    }

    pub fn trace(&self) -> f64 {
        self.entries[0][0] + self.entries[1][1]
    }

    /// ad − bc with bc taken from the log-space product.
    pub fn det(&self) -> f64 {
        self.entries[0][0] * self.entries[1][1] - self.log_offprod.exp()
    }
}

fn factor_and_dim(q: &Potential) -> Result<(&ConformalFactor, u32)> {
    match (&q.source, q.dim_n) {
        (Some(f), Some(n)) => Ok((f, n)),
        _ => Err(LabError::Precondition(
            "DN block needs a potential built from a conformal factor".into(),
        )),
    }
}

pub fn dn_block(f: &ConformalFactor, n: u32, omega: f64, mu: f64) -> Result<DNBlock> {
    let q = potential_from_factor(f, n, omega)?;
    dn_block_for(&q, mu)
}

/// Block Λ_g^m(ω) at spectral parameter μ for a factor-backed potential.
pub fn dn_block_for(q: &Potential, mu: f64) -> Result<DNBlock> {
    let (f, n) = factor_and_dim(q)?;
    let w = weyl_functions(q, mu)?;
    let [f0, df0, _] = f.jet(0.0);
    let [f1, df1, _] = f.jet(1.0);
    let (r0, r1) = (f0.sqrt(), f1.sqrt());
    let c0 = (n as f64 - 2.0) * df0 / (4.0 * f0 * r0);
    let c1 = (n as f64 - 2.0) * df1 / (4.0 * f1 * r1);
    let a = -w.m / r0 + c0;
    let d = -w.n / r1 - c1;
    // r = h^{1/4}(1)/h^{1/4}(0) = (f1/f0)^{(n−2)/4}
    let log_r = (n as f64 - 2.0) / 4.0 * (f1.ln() - f0.ln());
    let inv_delta = w.inv_delta;
    let off_upper = -(ScaledValue::from_log(1.0, log_r - r0.ln()) * inv_delta);
    let off_lower = -(ScaledValue::from_log(1.0, -log_r - r1.ln()) * inv_delta);
    let log_offprod = -0.5 * f0.ln() - 0.5 * f1.ln() + 2.0 * inv_delta.ln_abs();
    let mean = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot((0.5 * log_offprod).exp());
    Ok(DNBlock {
        mu,
        entries: [[a, off_upper.to_f64()], [off_lower.to_f64(), d]],
        off_upper,
        off_lower,
        log_offprod,
        lambda_minus: mean - rad,
        lambda_plus: mean + rad,
        m_weyl: w.m,
        n_weyl: w.n,
        delta: w.delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub m: u32,
    pub kappa: f64,
    pub multiplicity: u128,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteklovSpectrum {
    pub n: u32,
    pub omega: f64,
    pub factor_tag: String,
    pub rows: Vec<SpectrumRow>,
    #[serde(skip)]
    pub blocks: Vec<DNBlock>,
    /// Index from which both branches are strictly increasing.
    pub monotone_from: usize,
}

impl SteklovSpectrum {
    /// The multiset σ(Λ_g(ω)) with each value repeated by its multiplicity, sorted.
    /// Multiplicities are capped at `cap` per value to keep the list finite in practice.
    pub fn multiset(&self, cap: u128) -> Vec<f64> {
        let mut v = Vec::new();
        for r in &self.rows {
            let k = r.multiplicity.min(cap) as usize;
            for _ in 0..k {
                v.push(r.lambda_minus);
                v.push(r.lambda_plus);
            }
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    pub fn branch(&self, plus: bool) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| if plus { r.lambda_plus } else { r.lambda_minus })
            .collect()
    }
}

pub fn steklov_spectrum(
    f: &ConformalFactor,
    n: u32,
    omega: f64,
    m_max: u32,
) -> Result<SteklovSpectrum> {
    let q = potential_from_factor(f, n, omega)?;
    steklov_spectrum_for(&q, m_max)
}

pub fn steklov_spectrum_for(q: &Potential, m_max: u32) -> Result<SteklovSpectrum> {
    let (f, n) = factor_and_dim(q)?;
    let ms: Vec<u32> = (0..=m_max).collect();
    let blocks = par::try_map(&ms, |&m| dn_block_for(q, kappa(n, m)))?;
    let rows: Vec<SpectrumRow> = blocks
        .iter()
        .zip(&ms)
        .map(|(b, &m)| SpectrumRow {
            m,
            kappa: b.mu,
            multiplicity: multiplicity(n, m),
            lambda_minus: b.lambda_minus,
            lambda_plus: b.lambda_plus,
        })
        .collect();
    let mut monotone_from = rows.len().saturating_sub(1);
    while monotone_from > 0 {
        let (p, c) = (&rows[monotone_from - 1], &rows[monotone_from]);
        if c.lambda_minus > p.lambda_minus && c.lambda_plus > p.lambda_plus {
            monotone_from -= 1;
        } else {
            break;
        }
    }
    Ok(SteklovSpectrum {
        n,
        omega: q.omega,
        factor_tag: f.closed_form_tag().unwrap_or_else(|| "series".into()),
        rows,
        blocks,
        monotone_from,
    })
}

/// Largest singular value of a 2×2 matrix.
pub fn spectral_norm(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let s1 = (a + d).hypot(c - b);
    let s2 = (a - d).hypot(c + b);
    0.5 * (s1 + s2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalderonReport {
    /// sup over computed blocks of the block-difference norm.
    pub norm: f64,
    pub diverging: bool,
    /// Least-squares slope of block norm against √μ over the top window.
    pub slope: f64,
    pub per_block: Vec<(u32, f64, f64)>,
    /// 1/√f(0) − 1/√f̃(0) and 1/√f(1) − 1/√f̃(1).
    pub endpoint_gaps: [f64; 2],
}

pub const DIVERGENCE_SLOPE: f64 = 1e-3;
const SLOPE_WINDOW: usize = 10;

pub fn calderon_norm_difference(
    f: &ConformalFactor,
    f_tilde: &ConformalFactor,
    n: u32,
    omega: f64,
    m_max: u32,
) -> Result<CalderonReport> {
    let q = potential_from_factor(f, n, omega)?;
    let qt = potential_from_factor(f_tilde, n, omega)?;
    let ms: Vec<u32> = (0..=m_max).collect();
    let pairs = par::try_map(&ms, |&m| {
        let mu = kappa(n, m);
        Ok::<_, LabError>((dn_block_for(&q, mu)?, dn_block_for(&qt, mu)?))
    })?;
    let per_block: Vec<(u32, f64, f64)> = pairs
        .iter()
        .zip(&ms)
        .map(|((b, bt), &m)| {
            let mut d = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    d[i][j] = b.entries[i][j] - bt.entries[i][j];
                }
            }
            (m, b.mu.sqrt(), spectral_norm(d))
        })
        .collect();
    let norm = per_block.iter().map(|p| p.2).fold(0.0, f64::max);
    let top = &per_block[per_block.len().saturating_sub(SLOPE_WINDOW)..];
    let slope = if top.len() >= 3 {
        let xs: Vec<f64> = top.iter().map(|p| p.1).collect();
        let ys: Vec<f64> = top.iter().map(|p| p.2).collect();
        linear_fit(&xs, &ys).0
    } else {
        0.0
    };
    let e0 = 1.0 / f.eval(0.0).sqrt() - 1.0 / f_tilde.eval(0.0).sqrt();
    let e1 = 1.0 / f.eval(1.0).sqrt() - 1.0 / f_tilde.eval(1.0).sqrt();
    Ok(CalderonReport {
        norm,
        diverging: slope > DIVERGENCE_SLOPE,
        slope,
        per_block,
        endpoint_gaps: [e0, e1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities() {
        assert_eq!(multiplicity(3, 2), 5);
        assert_eq!(multiplicity(2, 3), 2);
        assert_eq!(multiplicity(7, 0), 1);
        assert_eq!(multiplicity(4, 3), 16);
        assert_eq!(kappa(3, 2), 6.0);
    }

    #[test]
    fn flat_block_at_zero() {
        let one = ConformalFactor::constant(1.0).unwrap();
        let b = dn_block(&one, 3, 0.0, 0.0).unwrap();
        assert!((b.entries[0][0] - 1.0).abs() < 1e-12);
        assert!((b.entries[0][1] + 1.0).abs() < 1e-12);
        assert!(b.lambda_minus.abs() < 1e-11);
        assert!((b.lambda_plus - 2.0).abs() < 1e-11);
    }

    #[test]
    fn flat_block_closed_forms() {
        let one = ConformalFactor::constant(1.0).unwrap();
        for &mu in &[0.5f64, 6.0, 400.0] {
            let b = dn_block(&one, 3, 0.0, mu).unwrap();
            let y = mu.sqrt();
            assert!((b.lambda_minus / (y * (y / 2.0).tanh()) - 1.0).abs() < 1e-9);
            assert!((b.lambda_plus / (y / (y / 2.0).tanh()) - 1.0).abs() < 1e-9);
            assert!((b.trace() / (b.lambda_minus + b.lambda_plus) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        assert!((spectral_norm([[3.0, 0.0], [0.0, -5.0]]) - 5.0).abs() < 1e-14);
        assert!((spectral_norm([[0.0, 2.0], [0.0, 0.0]]) - 2.0).abs() < 1e-14);
    }
}
