//! Müntz exponent systems, Gram-orthonormal Müntz–Legendre polynomials,
//! approximation indices and the moment-problem bound.

mod dd;

pub use dd::Dd;

use crate::dnmap::kappa;
use crate::error::{LabError, Result};
use crate::numerics::{bisect, gauss_legendre_on, golden_max};
use serde::{Deserialize, Serialize};

const GAP_SLACK: f64 = 1e-12;
pub const QUAD_NODES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuntzSystem {
    /// λ_0 = 0 < λ_1 < …
    pub lambdas: Vec<f64>,
    pub alpha: f64,
    pub m0: u32,
    /// Dimension of the source sphere problem (0 when built from raw exponents).
    pub n: u32,
}

impl MuntzSystem {
    /// Validates λ_0 = 0 and the gap condition λ_{k+1} − λ_k ≥ 2.
    pub fn from_lambdas(lambdas: Vec<f64>, alpha: f64) -> Result<Self> {
        if lambdas.first() != Some(&0.0) {
            return Err(LabError::Sequence {
                index: 0,
                gap: lambdas.first().copied().unwrap_or(f64::NAN),
            });
        }
        for k in 1..lambdas.len() {
            let gap = lambdas[k] - lambdas[k - 1];
            if !(gap >= 2.0 - GAP_SLACK) {
                return Err(LabError::Sequence { index: k, gap });
            }
        }
        Ok(MuntzSystem {
            lambdas,
            alpha,
            m0: 0,
            n: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.lambdas.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// λ_k = 2y_{m0+k} − 1 − α with α = 2y_{m0} − 1 and y_m = √κ_m.
pub fn muntz_sequence(n: u32, m0: u32, m_max: u32) -> Result<MuntzSystem> {
    if m_max < m0 {
        return Err(LabError::Dimension(format!(
            "m_max = {m_max} below m0 = {m0}"
        )));
    }
    let y = |m: u32| kappa(n, m).sqrt();
    let y0 = y(m0);
    let lambdas: Vec<f64> = (m0..=m_max)
        .map(|m| if m == m0 { 0.0 } else { 2.0 * (y(m) - y0) })
        .collect();
    let mut sys = MuntzSystem::from_lambdas(lambdas, 2.0 * y0 - 1.0).map_err(|e| match e {
        LabError::Sequence { index, gap } => LabError::Sequence {
            index: index + m0 as usize,
            gap,
        },
        other => other,
    })?;
    sys.m0 = m0;
    sys.n = n;
    Ok(sys)
}

/// Lower-triangular C_{pj}, both in double-double and as (sign, ln|C|).
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub lambdas: Vec<f64>,
    pub dd: Vec<Vec<Dd>>,
    pub log: Vec<Vec<(f64, f64)>>,
}

impl CMatrix {
    pub fn p_max(&self) -> usize {
        self.dd.len() - 1
    }

    /// L_p(x) = Σ_j C_{pj} x^{λ_j}, summed in double-double.
    pub fn eval(&self, p: usize, x: f64) -> f64 {
        let lx = if x > 0.0 { Dd::new(x).ln() } else { Dd::ZERO };
        let mut s = Dd::ZERO;
        for (j, c) in self.dd[p].iter().enumerate() {
            let lam = self.lambdas[j];
            let pw = if lam == 0.0 {
                Dd::ONE
            } else if x <= 0.0 {
                Dd::ZERO
            } else {
                (lx * lam).exp()
            };
            s = s + *c * pw;
        }
        s.to_f64()
    }

    /// ln Σ_ℓ |C_{pℓ}|.
    pub fn row_log_sum(&self, p: usize) -> f64 {
        let row = &self.log[p];
        let mx = row.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        mx + row.iter().map(|c| (c.1 - mx).exp()).sum::<f64>().ln()
    }
}

/// C_{pj} = √(2λ_p + 1) Π_{r<p}(λ_j + λ_r + 1) / Π_{r≤p, r≠j}(λ_j − λ_r).
pub fn gram_coefficients(sys: &MuntzSystem, p_max: usize) -> Result<CMatrix> {
    if p_max >= sys.len() {
        return Err(LabError::Dimension(format!(
            "p_max = {p_max} needs {} exponents, have {}",
            p_max + 1,
            sys.len()
        )));
    }
    let lam = &sys.lambdas[..=p_max];
    let mut dd_rows = Vec::with_capacity(p_max + 1);
    let mut log_rows = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let lead = Dd::new(2.0 * lam[p] + 1.0).sqrt();
        let lead_log = 0.5 * (2.0 * lam[p] + 1.0).ln();
        let mut row_dd = Vec::with_capacity(p + 1);
        let mut row_log = Vec::with_capacity(p + 1);
        for j in 0..=p {
            let mut num = Dd::ONE;
            let mut den = Dd::ONE;
            let mut lg = lead_log;
            let mut sign = 1.0;
            for r in 0..p {
                let f = Dd::new(lam[j]) + lam[r] + 1.0;
                num = num * f;
                lg += f.to_f64().ln();
            }
            for r in 0..=p {
                if r == j {
                    continue;
                }
                let f = Dd::new(lam[j]) - lam[r];
                den = den * f;
                lg -= f.to_f64().abs().ln();
                if f.hi < 0.0 {
                    sign = -sign;
                }
            }
            row_dd.push(lead * num / den);
            row_log.push((sign, lg));
        }
        dd_rows.push(row_dd);
        log_rows.push(row_log);
    }
    Ok(CMatrix {
        lambdas: lam.to_vec(),
        dd: dd_rows,
        log: log_rows,
    })
}

/// Gauss–Legendre rule on [0, 1] split at the given interior breakpoints.
pub fn panel_rule(nodes_per_panel: usize, breaks: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b < 1.0)
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut edges = vec![0.0];
    edges.extend(pts);
    edges.push(1.0);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for w in edges.windows(2) {
        let (x, wt) = gauss_legendre_on(nodes_per_panel, w[0], w[1]);
        xs.extend(x);
        ws.extend(wt);
    }
    (xs, ws)
}

/// max_{p,r ≤ p_max} |∫₀¹ L_p L_r − δ_pr| by 256-node quadrature.
pub fn orthonormality_residual(c: &CMatrix) -> f64 {
    let (xs, ws) = gauss_legendre_on(QUAD_NODES, 0.0, 1.0);
    let vals: Vec<Vec<f64>> = (0..=c.p_max())
        .map(|p| xs.iter().map(|&x| c.eval(p, x)).collect())
        .collect();
    let mut worst = 0.0f64;
    for p in 0..vals.len() {
        for r in 0..=p {
            let g: f64 = ws
                .iter()
                .enumerate()
                .map(|(i, w)| w * vals[p][i] * vals[r][i])
                .sum();
            let target = if p == r { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeIndex {
    /// |Π_{k≤m}(λ_k − ½)/(λ_k + 3/2)|.
    pub eps2_product: f64,
    /// max_{y≥0} |B(1 + iy)/(1 + iy)| with B(z) = Π_{k≤m}(z − λ_k − ½)/(z + λ_k + ½).
    pub eps2_maxdef: f64,
    pub argmax: f64,
}

/// ε₂(Λ_m) by the product formula and by the Blaschke max-definition.
pub fn blaschke_index(sys: &MuntzSystem, m: usize) -> BlaschkeIndex {
    let lam = &sys.lambdas[..=m.min(sys.len() - 1)];
    let log_prod: f64 = lam
        .iter()
        .map(|&l| (l - 0.5).abs().ln() - (l + 1.5).ln())
        .sum();
    // ln|B(1+iy)/(1+iy)|
    let f = |y: f64| {
        let y2 = y * y;
        let s: f64 = lam
            .iter()
            .map(|&l| {
                let a = l + 0.5;
                0.5 * (((1.0 - a) * (1.0 - a) + y2).ln() - ((1.0 + a) * (1.0 + a) + y2).ln())
            })
            .sum();
        s - 0.5 * (1.0 + y2).ln()
    };
    let y_top = 8.0 * (lam.last().copied().unwrap_or(0.0) + 2.0);
    let grid = 4000;
    let mut best = (0.0, f(0.0));
    for i in 1..=grid {
        let y = y_top * i as f64 / grid as f64;
        let v = f(y);
        if v > best.1 {
            best = (y, v);
        }
    }
    let step = y_top / grid as f64;
    let (ya, yb) = ((best.0 - step).max(0.0), best.0 + step);
    let (y, v) = golden_max(f, ya, yb, 1e-12);
    let (argmax, lv) = if v > best.1 { (y, v) } else { best };
    BlaschkeIndex {
        eps2_product: log_prod.exp(),
        eps2_maxdef: lv.exp(),
        argmax,
    }
}

/// L²-modulus of continuity w(h, u) = sup_{0≤r≤u} ‖h(· + r) − h‖_{L²(0, 1−r)}.
pub fn modulus_of_continuity<F: Fn(f64) -> f64>(h: F, u: f64) -> f64 {
    let diff = |r: f64| {
        if r >= 1.0 {
            return 0.0;
        }
        let (xs, ws) = gauss_legendre_on(512, 0.0, 1.0 - r);
        xs.iter()
            .zip(&ws)
            .map(|(x, w)| w * (h(x + r) - h(*x)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let pts = 64;
    let mut best = (0usize, 0.0f64);
    let rs: Vec<f64> = (0..pts).map(|i| u * i as f64 / (pts - 1) as f64).collect();
    for (i, &r) in rs.iter().enumerate() {
        let v = diff(r);
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo = rs[best.0.saturating_sub(1)];
    let hi = rs[(best.0 + 1).min(pts - 1)];
    let mut top = best.1;
    for i in 0..pts {
        top = top.max(diff(lo + (hi - lo) * i as f64 / (pts - 1) as f64));
    }
    top
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub m: usize,
    /// ε too large: g(0) > 1/√ε, so m = 0 is returned without a root.
    pub eps_too_large: bool,
    pub root: f64,
}

/// g(t) = (3/2)(4t + 2C + 1)(t + 1)(9M₁/2)^{2t}.
pub fn truncation_g(t: f64, c: f64, m1: f64) -> f64 {
    1.5 * (4.0 * t + 2.0 * c + 1.0) * (t + 1.0) * (4.5 * m1).powf(2.0 * t)
}

/// m(ε) = ⌊g⁻¹(1/√ε)⌋ by bisection on [0, 200].
pub fn truncation_rule(eps: f64, c: f64, m1: f64) -> Truncation {
    let target = -0.5 * eps.ln();
    let lg =
        |t: f64| (1.5 * (4.0 * t + 2.0 * c + 1.0) * (t + 1.0)).ln() + 2.0 * t * (4.5 * m1).ln();
    if lg(0.0) > target {
        return Truncation {
            m: 0,
            eps_too_large: true,
            root: 0.0,
        };
    }
    if lg(200.0) <= target {
        return Truncation {
            m: 200,
            eps_too_large: false,
            root: 200.0,
        };
    }
    let root = bisect(|t| lg(t) - target, 0.0, 200.0, 1e-9).unwrap_or(0.0);
    let mut m = root.floor() as usize;
    // floor of a bisection bracket can sit one past the true root
    while m > 0 && lg(m as f64) > target {
        m -= 1;
    }
    Truncation {
        m,
        eps_too_large: false,
        root,
    }
}

/// (j + p)!/(j! j! (p − j)!) = C(j + p, j)·C(p, j).
pub fn multinomial(j: u32, p: u32) -> u128 {
    let binom = |n: u128, k: u128| {
        let k = k.min(n - k);
        let mut a: u128 = 1;
        for i in 0..k {
            a = a * (n - i) / (i + 1);
        }
        a
    };
    binom((j + p) as u128, j as u128) * binom(p as u128, j as u128)
}

/// Exact check of (j + p)!/(j! j! (p − j)!) ≤ 3^{j+p} for 0 ≤ j ≤ p ≤ p_max.
pub fn multinomial_bound_holds(p_max: u32) -> bool {
    (0..=p_max).all(|p| (0..=p).all(|j| multinomial(j, p) <= 3u128.pow(j + p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// projection_term + approx_term.
    pub norm_bound: f64,
    /// ε² Σ_{k≤m} (Σ_ℓ |C_kℓ|)².
    pub projection_term: f64,
    /// ‖h − π_m h‖₂².
    pub approx_term: f64,
    pub h_norm_sq: f64,
    /// ‖π_m h‖₂² = Σ ⟨h, L_k⟩².
    pub projection_norm_sq: f64,
    /// max_k |∫ t^{λ_k} h| and where it occurs.
    pub worst_moment: (usize, f64),
    pub moments_ok: bool,
    /// ‖h‖₂² ≤ norm_bound + 1e−8.
    pub bound_holds: bool,
}

/// Projection bound ‖h‖₂² ≤ ε²Σ_k(Σ_ℓ|C_kℓ|)² + E₂(h, Λ_m)², with quadrature panels split at `breaks`.
pub fn moment_bound_with<F: Fn(f64) -> f64>(
    eps: f64,
    c: &CMatrix,
    h: F,
    m: usize,
    breaks: &[f64],
) -> Result<MomentReport> {
    if m > c.p_max() {
        return Err(LabError::Dimension(format!(
            "m = {m} beyond computed rows {}",
            c.p_max()
        )));
    }
    let (xs, ws) = panel_rule(QUAD_NODES, breaks);
    let hv: Vec<f64> = xs.iter().map(|&x| h(x)).collect();
    let h_norm_sq: f64 = hv.iter().zip(&ws).map(|(v, w)| w * v * v).sum();

    let mut worst_moment = (0usize, 0.0f64);
    for k in 0..=m {
        let lam = c.lambdas[k];
        let mu: f64 = xs
            .iter()
            .zip(&ws)
            .zip(&hv)
            .map(|((x, w), v)| w * x.powf(lam) * v)
            .sum();
        if mu.abs() > worst_moment.1 {
            worst_moment = (k, mu.abs());
        }
    }

    let mut resid = hv.clone();
    let mut projection_norm_sq = 0.0;
    for k in 0..=m {
        let lk: Vec<f64> = xs.iter().map(|&x| c.eval(k, x)).collect();
        let coef: f64 = lk
            .iter()
            .zip(&ws)
            .zip(&hv)
            .map(|((l, w), v)| w * l * v)
            .sum();
        projection_norm_sq += coef * coef;
        for (r, l) in resid.iter_mut().zip(&lk) {
            *r -= coef * l;
        }
    }
    let approx_term: f64 = resid.iter().zip(&ws).map(|(r, w)| w * r * r).sum();
    let projection_term: f64 = (0..=m)
        .map(|k| (eps.ln() + c.row_log_sum(k)).exp().powi(2))
        .sum();
    let norm_bound = projection_term + approx_term;
    Ok(MomentReport {
        norm_bound,
        projection_term,
        approx_term,
        h_norm_sq,
        projection_norm_sq,
        worst_moment,
        moments_ok: worst_moment.1 <= eps,
        bound_holds: h_norm_sq <= norm_bound + 1e-8,
    })
}

pub fn moment_bound<F: Fn(f64) -> f64>(
    eps: f64,
    c: &CMatrix,
    h: F,
    m: usize,
) -> Result<MomentReport> {
    moment_bound_with(eps, c, h, m, &[])
}

/// E₂(h, Λ_m) / w(h, ε₂(Λ_m)), the empirical constant of the Jackson-type step.
pub fn jackson_ratio<F: Fn(f64) -> f64 + Copy>(
    sys: &MuntzSystem,
    c: &CMatrix,
    h: F,
    m: usize,
) -> Result<f64> {
    let r = moment_bound(0.0, c, h, m)?;
    let e2 = blaschke_index(sys, m).eps2_product;
    let w = modulus_of_continuity(h, e2.min(0.999));
    Ok(r.approx_term.max(0.0).sqrt() / w)
}

/// Row of the Müntz table: (k, λ_k, gap to λ_{k−1}, ε₂(Λ_k), ln Σ_ℓ |C_kℓ|).
pub fn muntz_table(sys: &MuntzSystem) -> Vec<(usize, f64, f64, f64, f64)> {
    let mut out = Vec::with_capacity(sys.len());
    let mut log_eps = 0.0;
    for k in 0..sys.len() {
        let l = sys.lambdas[k];
        log_eps += (l - 0.5).abs().ln() - (l + 1.5).ln();
        let gap = if k == 0 { 0.0 } else { l - sys.lambdas[k - 1] };
        // ln|C_kℓ| straight from the log factors
        let lead = 0.5 * (2.0 * l + 1.0).ln();
        let logs: Vec<f64> = (0..=k)
            .map(|j| {
                let lj = sys.lambdas[j];
                let num: f64 = (0..k).map(|r| (lj + sys.lambdas[r] + 1.0).ln()).sum();
                let den: f64 = (0..=k)
                    .filter(|&r| r != j)
                    .map(|r| (lj - sys.lambdas[r]).abs().ln())
                    .sum();
                lead + num - den
            })
            .collect();
        let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let row = mx + logs.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        out.push((k, l, gap, log_eps.exp(), row));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequences() {
        let s = muntz_sequence(2, 0, 10).unwrap();
        for (k, l) in s.lambdas.iter().enumerate() {
            assert!((l - 2.0 * k as f64).abs() < 1e-12);
        }
        let s3 = muntz_sequence(3, 1, 5).unwrap();
        assert!((s3.lambdas[1] - 2.0 * (6f64.sqrt() - 2f64.sqrt())).abs() < 1e-14);
        assert!((s3.alpha - (2.0 * 2f64.sqrt() - 1.0)).abs() < 1e-14);
        let big = muntz_sequence(3, 100, 140).unwrap();
        assert!(big.gaps().iter().all(|g| *g - 2.0 <= 0.01 && *g >= 2.0));
        assert!(matches!(
            MuntzSystem::from_lambdas(vec![0.0, 2.0, 3.5], 0.0),
            Err(LabError::Sequence { index: 2, .. })
        ));
    }

    #[test]
    fn first_two_polynomials() {
        let s = MuntzSystem::from_lambdas(vec![0.0, 2.0], 0.0).unwrap();
        let c = gram_coefficients(&s, 1).unwrap();
        let r5 = 5f64.sqrt();
        assert!((c.dd[1][0].to_f64() + r5 / 2.0).abs() < 1e-15);
        assert!((c.dd[1][1].to_f64() - 1.5 * r5).abs() < 1e-15);
        assert_eq!(c.eval(0, 0.3), 1.0);
        assert!((c.eval(1, 0.4) - r5 * (3.0 * 0.16 - 1.0) / 2.0).abs() < 1e-14);
        assert_eq!(c.log[1][0].0, -1.0);
    }

    #[test]
    fn orthonormal_to_twenty() {
        let s = muntz_sequence(3, 1, 25).unwrap();
        let c = gram_coefficients(&s, 20).unwrap();
        assert!(orthonormality_residual(&c) < 1e-8);
        let s2 = MuntzSystem::from_lambdas(vec![0.0, 2.0, 4.0], 0.0).unwrap();
        assert!(orthonormality_residual(&gram_coefficients(&s2, 2).unwrap()) < 1e-12);
    }

    #[test]
    fn blaschke_products() {
        let one = MuntzSystem::from_lambdas(vec![0.0], 0.0).unwrap();
        assert!((blaschke_index(&one, 0).eps2_product - 1.0 / 3.0).abs() < 1e-15);
        let two = MuntzSystem::from_lambdas(vec![0.0, 2.0], 0.0).unwrap();
        let b = blaschke_index(&two, 1);
        assert!((b.eps2_product - 1.0 / 7.0).abs() < 1e-15);
        // the max over the line Re z = 1 sits away from y = 0
        assert!((b.eps2_maxdef - 0.230940106881).abs() < 1e-9, "{b:?}");
    }

    #[test]
    fn truncation_examples() {
        let t = truncation_rule(1.0 / 81.0, 0.5, 2.0);
        assert_eq!(t.m, 0);
        assert!(!t.eps_too_large);
        assert_eq!(truncation_g(1.0, 0.5, 2.0), 1458.0);
        assert!(truncation_rule(0.5, 0.5, 2.0).eps_too_large);
        let mut last = 0;
        let mut e = 1e-3;
        for _ in 0..60 {
            let m = truncation_rule(e, 0.5, 2.0).m;
            assert!(m >= last);
            assert!(truncation_g(m as f64, 0.5, 2.0) <= 1.0 / e.sqrt());
            last = m;
            e /= 2.0;
        }
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(1, 2), 6);
        assert!(multinomial_bound_holds(30));
    }

    #[test]
    fn modulus_of_identity() {
        let w = modulus_of_continuity(|x| x, 0.1);
        assert!((w - 0.1 * 0.9f64.sqrt()).abs() < 1e-10);
        assert_eq!(modulus_of_continuity(|_| 2.0, 0.3), 0.0);
    }

    #[test]
    fn projection_bound_cases() {
        let s = muntz_sequence(3, 1, 12).unwrap();
        let c = gram_coefficients(&s, 10).unwrap();
        let r = moment_bound(0.0, &c, |x| c.eval(5, x), 7).unwrap();
        assert!((r.projection_norm_sq - 1.0).abs() < 1e-9);
        assert!(r.approx_term < 1e-9);
        let l1 = s.lambdas[1];
        let r = moment_bound(1.0, &c, |x| x.powf(l1), 1).unwrap();
        assert!(r.approx_term < 1e-12);
        assert!(r.norm_bound >= 1.0 / (2.0 * l1 + 1.0));
        assert!(r.bound_holds && r.moments_ok);
        let z = moment_bound(0.0, &c, |_| 0.0, 4).unwrap();
        assert_eq!(z.norm_bound, 0.0);
    }
}
