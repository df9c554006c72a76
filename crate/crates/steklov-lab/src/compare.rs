//! Closeness of Steklov spectra up to a sequence (ε_m), and exponential
//! closeness rates.

use crate::asymptotics::Branch;
use crate::dnmap::SteklovSpectrum;
use crate::error::{LabError, Result};
use crate::numerics::linear_fit;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessRow {
    pub m: u32,
    pub branch: Branch,
    pub value: f64,
    pub matched_value: f64,
    pub gap: f64,
    pub eps: f64,
    pub cardinality_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub holds: bool,
    pub holds_forward: bool,
    pub holds_backward: bool,
    pub forward: Vec<ClosenessRow>,
    pub backward: Vec<ClosenessRow>,
    /// Rows whose ε-window also contains eigenvalues of a different block.
    pub ambiguous: usize,
}

impl ClosenessReport {
    pub fn max_gap(&self) -> f64 {
        self.forward
            .iter()
            .chain(&self.backward)
            .map(|r| r.gap)
            .fold(0.0, f64::max)
    }
}

/// Sorted (value, multiplicity, m) triples with multiplicity prefix sums.
struct Multiset {
    values: Vec<f64>,
    ms: Vec<u32>,
    prefix: Vec<u128>,
}

impl Multiset {
    fn new(s: &SteklovSpectrum) -> Self {
        let mut items: Vec<(f64, u128, u32)> = Vec::with_capacity(2 * s.rows.len());
        for r in &s.rows {
            items.push((r.lambda_minus, r.multiplicity, r.m));
            items.push((r.lambda_plus, r.multiplicity, r.m));
        }
        items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut prefix = vec![0u128];
        for it in &items {
            prefix.push(prefix.last().unwrap() + it.1);
        }
        Multiset {
            values: items.iter().map(|i| i.0).collect(),
            ms: items.iter().map(|i| i.2).collect(),
            prefix,
        }
    }

    fn range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let a = self.values.partition_point(|&v| v < lo);
        let b = self.values.partition_point(|&v| v <= hi);
        (a, b)
    }

    fn count(&self, lo: f64, hi: f64) -> u128 {
        let (a, b) = self.range(lo, hi);
        self.prefix[b] - self.prefix[a]
    }

    fn nearest(&self, x: f64) -> f64 {
        let i = self.values.partition_point(|&v| v < x);
        let mut best = f64::NAN;
        let mut gap = f64::INFINITY;
        for j in [i.wrapping_sub(1), i] {
            if let Some(&v) = self.values.get(j) {
                if (v - x).abs() < gap {
                    gap = (v - x).abs();
                    best = v;
                }
            }
        }
        best
    }
}

fn eps_at(eps: &[f64], m: u32) -> f64 {
    eps.get(m as usize).or(eps.last()).copied().unwrap_or(0.0)
}

fn one_sided(
    a: &SteklovSpectrum,
    ma: &Multiset,
    mb: &Multiset,
    eps: &[f64],
) -> (Vec<ClosenessRow>, usize) {
    let mut rows = Vec::with_capacity(2 * a.rows.len());
    let mut ambiguous = 0;
    for r in &a.rows {
        let e = eps_at(eps, r.m);
        for (branch, value) in [
            (Branch::Minus, r.lambda_minus),
            (Branch::Plus, r.lambda_plus),
        ] {
            let matched = mb.nearest(value);
            let gap = (matched - value).abs();
            let cardinality_ok = ma.count(value - e, value + e) == mb.count(value - e, value + e);
            let (i, j) = ma.range(value - e, value + e);
            if ma.ms[i..j].iter().any(|&m| m != r.m) {
                ambiguous += 1;
            }
            rows.push(ClosenessRow {
                m: r.m,
                branch,
                value,
                matched_value: matched,
                gap,
                eps: e,
                cardinality_ok,
            });
        }
    }
    (rows, ambiguous)
}

/// Both one-sided relations A ⊂∼ Ã and Ã ⊂∼ A, multiplicity-aware.
pub fn spectra_close(
    s: &SteklovSpectrum,
    s_tilde: &SteklovSpectrum,
    eps: &[f64],
) -> ClosenessReport {
    let ma = Multiset::new(s);
    let mb = Multiset::new(s_tilde);
    let (forward, amb_f) = one_sided(s, &ma, &mb, eps);
    let (backward, amb_b) = one_sided(s_tilde, &mb, &ma, eps);
    let ok = |rows: &[ClosenessRow]| rows.iter().all(|r| r.gap <= r.eps && r.cardinality_ok);
    let holds_forward = ok(&forward);
    let holds_backward = ok(&backward);
    ClosenessReport {
        holds: holds_forward && holds_backward,
        holds_forward,
        holds_backward,
        forward,
        backward,
        ambiguous: amb_f + amb_b,
    }
}

/// Constant ε (to relative precision 1e−3) at which the spectra become close, found by
/// doubling from the largest nearest-neighbour gap and then bisecting. The cardinality
/// clause is not monotone in ε once window edges cross neighbouring eigenvalues, so for
/// dense spectra this is the edge of the bracket found, not a global minimum.
pub fn measure_epsilon(s: &SteklovSpectrum, s_tilde: &SteklovSpectrum) -> f64 {
    let holds = |e: f64| spectra_close(s, s_tilde, &[e]).holds;
    let start = spectra_close(s, s_tilde, &[0.0]).max_gap().max(1e-300);
    if holds(0.0) {
        return 0.0;
    }
    let mut hi = start;
    let mut guard = 0;
    while !holds(hi) && guard < 200 {
        hi *= 2.0;
        guard += 1;
    }
    let mut lo = start * 0.5;
    while hi / lo > 1.001 {
        let mid = (lo * hi).sqrt();
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub intercept: f64,
    /// (m, √κ_m, gap) used in the fit.
    pub points: Vec<(u32, f64, f64)>,
}

/// Least-squares slope of ln|λ(κ_m) − λ̃(κ_m)| against −√κ_m over `m_range`.
pub fn exponential_rate_fit(
    s: &SteklovSpectrum,
    s_tilde: &SteklovSpectrum,
    branch: Branch,
    m_range: (u32, u32),
) -> Result<RateFit> {
    let plus = branch == Branch::Plus;
    let mut points = Vec::new();
    for (r, rt) in s.rows.iter().zip(&s_tilde.rows) {
        if r.m < m_range.0 || r.m > m_range.1 {
            continue;
        }
        let (a, b) = if plus {
            (r.lambda_plus, rt.lambda_plus)
        } else {
            (r.lambda_minus, rt.lambda_minus)
        };
        let gap = (a - b).abs();
        if gap > 1e-13 * (1.0 + a.abs()) {
            points.push((r.m, r.kappa.sqrt(), gap));
        }
    }
    if points.len() < 3 {
        return Err(LabError::FitInvalid(format!(
            "only {} gaps above the noise floor in m ∈ [{}, {}]",
            points.len(),
            m_range.0,
            m_range.1
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| -p.1).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2.ln()).collect();
    let (rate, intercept, r_squared) = linear_fit(&xs, &ys);
    if !(rate > 0.0) {
        return Err(LabError::FitInvalid(format!(
            "gaps do not decay (fitted rate {rate:.3e})"
        )));
    }
    Ok(RateFit {
        rate,
        r_squared,
        intercept,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnmap::SpectrumRow;

    fn spec(vals: &[(f64, f64, u128)]) -> SteklovSpectrum {
        SteklovSpectrum {
            n: 3,
            omega: 0.0,
            factor_tag: "test".into(),
            rows: vals
                .iter()
                .enumerate()
                .map(|(m, &(a, b, k))| SpectrumRow {
                    m: m as u32,
                    kappa: (m * (m + 1)) as f64,
                    multiplicity: k,
                    lambda_minus: a,
                    lambda_plus: b,
                })
                .collect(),
            blocks: vec![],
            monotone_from: 0,
        }
    }

    #[test]
    fn reflexive_and_symmetric() {
        let a = spec(&[(0.0, 2.0, 1), (1.5, 3.0, 3), (2.5, 4.0, 5)]);
        let b = spec(&[(0.0, 2.0 + 1e-4, 1), (1.5, 3.0, 3), (2.5 - 1e-4, 4.0, 5)]);
        assert!(spectra_close(&a, &a, &[1e-12]).holds);
        assert_eq!(
            spectra_close(&a, &b, &[1e-3]).holds,
            spectra_close(&b, &a, &[1e-3]).holds
        );
        assert!(spectra_close(&a, &b, &[1e-3]).holds);
        assert!(!spectra_close(&a, &b, &[1e-5]).holds);
    }

    #[test]
    fn cardinality_catches_duplicates() {
        let a = spec(&[(0.0, 2.0, 1), (1.5, 3.0, 3)]);
        let mut b = a.clone();
        b.rows[1].multiplicity = 4;
        let r = spectra_close(&a, &b, &[1e-6]);
        assert!(!r.holds);
        assert!(r.forward.iter().all(|row| row.gap == 0.0));
    }

    #[test]
    fn epsilon_measurement() {
        let a = spec(&[(0.0, 2.0, 1), (1.5, 3.0, 3)]);
        let b = spec(&[(0.0, 2.0, 1), (1.5 + 3e-5, 3.0, 3)]);
        let e = measure_epsilon(&a, &b);
        assert!(e >= 2.999e-5 && e < 3.01e-5, "{e}");
    }
}
