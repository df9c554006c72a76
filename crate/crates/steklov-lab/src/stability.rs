//! Stability experiments: the Steklov chain (spectral gap → Weyl data →
//! B-operator moments → Müntz projection bound → ‖q − q̃‖₂ bound), the
//! Calderón chain through the D-operator, and the sup-norm factor bound.

use crate::compare::{measure_epsilon, spectra_close};
use crate::dnmap::{calderon_norm_difference, kappa, steklov_spectrum, SteklovSpectrum};
use crate::error::{LabError, Result};
use crate::geometry::{class_membership, potential_from_factor, ConformalFactor, Potential};
use crate::muntz::{
    blaschke_index, gram_coefficients, modulus_of_continuity, moment_bound_with, muntz_sequence,
    panel_rule, truncation_rule, MomentReport, MuntzSystem, QUAD_NODES,
};
use crate::numerics::{bisect, gauss_legendre_on, interp_uniform};
use crate::ode::{weyl_functions, ScaledValue};
use crate::par;
use crate::transform::{
    build_b, build_d, invert_b, l2_norm, solve_kernel, IntegralOperator, DEFAULT_TOL,
};
use serde::{Deserialize, Serialize};

const E1: f64 = 0.36787944117144233;
const E2: f64 = 0.1353352832366127;
const NORM_NODES: usize = 512;
const SUP_GRID: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Steklov,
    Calderon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub m_max: u32,
    pub kernel_grid: usize,
    /// Class constant A; measured from the pair when absent.
    pub class_a: Option<f64>,
    /// Relative tolerance for the symmetry and endpoint checks.
    pub endpoint_tol: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            m_max: 40,
            kernel_grid: 256,
            class_a: None,
            endpoint_tol: 1e-10,
        }
    }
}

/// Per-block Weyl-data gaps between two symmetric factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylGapRow {
    pub m: u32,
    pub y: f64,
    /// |(MN − 1/Δ²) − (M̃Ñ − 1/Δ̃²)|.
    pub mn_gap: f64,
    pub trace_gap: f64,
    pub det_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub holds: bool,
    pub max_gap: f64,
    pub ambiguous: usize,
    /// First m from which every eigenvalue's nearest partner sits in the same block.
    pub pairing_from: Option<u32>,
}

/// Everything computed along the moment chain, kept for post-mortem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub alpha: f64,
    pub truncation_m: usize,
    pub eps_too_large: bool,
    pub moments_quadrature: Vec<f64>,
    pub moments_spectral: Vec<f64>,
    /// max_k |μ_k^quad − μ_k^spec| / (max_k |μ_k^spec| + 1e−300).
    pub moment_mismatch: f64,
    pub eps_moment: f64,
    /// eps_moment / eps.
    pub moment_constant: f64,
    pub class_a: f64,
    pub g_a: f64,
    pub kernel_sup: f64,
    pub kernel_tau_sup: f64,
    pub eps2: f64,
    pub modulus: f64,
    pub modulus_class: f64,
    pub jackson: f64,
    pub moments: MomentReport,
    pub h_norm: f64,
    pub h_bound: f64,
    pub pythagoras_defect: f64,
    pub op_l_norm: f64,
    pub op_l_bound: f64,
    pub inverse_bound: f64,
    pub inversion_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPathway {
    pub x0: Option<f64>,
    /// Bound on sup|F/F̃ − 1| from the measured ‖q − q̃‖₂.
    pub ratio_bound: f64,
    /// Sup-norm bound on f − f̃ from the measured ‖q − q̃‖₂.
    pub f_gap_bound: f64,
    /// Same, driven by the moment-chain bound instead.
    pub f_gap_bound_chain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub mode: Mode,
    pub n: u32,
    pub omega: f64,
    pub eps: f64,
    pub spectral_gap_check: GapSummary,
    pub trace_det_gaps: Vec<WeylGapRow>,
    /// (min, max) of mn_gap/(eps·y_m) over the top half of the m range.
    pub weyl_band: Option<(f64, f64)>,
    /// (m, |N − Ñ|) per block.
    pub n_gaps: Vec<(u32, f64)>,
    pub chain: ChainReport,
    /// Moment-chain bound on ‖q − q̃‖₂.
    #[serde(rename = "q_gap_L2")]
    pub q_gap_l2: f64,
    /// Directly computed ‖q − q̃‖₂.
    #[serde(rename = "q_gap_L2_true")]
    pub q_gap_l2_true: f64,
    pub q_gap_sup: f64,
    pub q_gap_h1: f64,
    pub f_gap_sup: f64,
    pub pathway: Option<FactorPathway>,
    /// q_gap_L2 · ln(1/eps).
    pub bound_product: f64,
    pub assertions: Vec<(String, bool)>,
}

impl ExperimentRecord {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.1)
    }
}

fn weyl_rows(s: &SteklovSpectrum, st: &SteklovSpectrum) -> Vec<WeylGapRow> {
    s.blocks
        .iter()
        .zip(&st.blocks)
        .zip(&s.rows)
        .map(|((b, bt), r)| {
            let comb = |blk: &crate::dnmap::DNBlock| {
                let inv = blk.delta.recip();
                blk.m_weyl * blk.n_weyl - (inv * inv).to_f64()
            };
            WeylGapRow {
                m: r.m,
                y: r.kappa.sqrt(),
                mn_gap: (comb(b) - comb(bt)).abs(),
                trace_gap: (b.trace() - bt.trace()).abs(),
                det_gap: (b.det() - bt.det()).abs(),
            }
        })
        .collect()
}

fn require_symmetric(f: &ConformalFactor, name: &str, tol: f64) -> Result<()> {
    if f.is_symmetric(tol) {
        Ok(())
    } else {
        Err(LabError::Precondition(format!(
            "{name} is not symmetric about x = 1/2"
        )))
    }
}

/// Weyl-data gaps per block for m in `m_range`; both factors must be symmetric.
pub fn discrete_weyl_gaps(
    f: &ConformalFactor,
    f_tilde: &ConformalFactor,
    n: u32,
    omega: f64,
    m_range: (u32, u32),
) -> Result<Vec<WeylGapRow>> {
    require_symmetric(f, "f", 1e-10)?;
    require_symmetric(f_tilde, "f_tilde", 1e-10)?;
    let s = steklov_spectrum(f, n, omega, m_range.1)?;
    let st = steklov_spectrum(f_tilde, n, omega, m_range.1)?;
    Ok(weyl_rows(&s, &st)
        .into_iter()
        .filter(|r| r.m >= m_range.0)
        .collect())
}

/// First m from which both eigenvalues of every block have their nearest partner in the same block.
pub fn pairing_from(s: &SteklovSpectrum, st: &SteklovSpectrum) -> Option<u32> {
    let all: Vec<(f64, u32)> = st
        .rows
        .iter()
        .flat_map(|r| [(r.lambda_minus, r.m), (r.lambda_plus, r.m)])
        .collect();
    let paired = |v: f64, m: u32| {
        let mut best = (f64::INFINITY, u32::MAX);
        for &(w, mw) in &all {
            let d = (w - v).abs();
            if d < best.0 || (d == best.0 && mw == m) {
                best = (d, mw);
            }
        }
        best.1 == m
    };
    let ok: Vec<bool> = s
        .rows
        .iter()
        .map(|r| paired(r.lambda_minus, r.m) && paired(r.lambda_plus, r.m))
        .collect();
    let last_bad = ok.iter().rposition(|b| !b);
    match last_bad {
        None => s.rows.first().map(|r| r.m),
        Some(i) if i + 1 < s.rows.len() => Some(s.rows[i + 1].m),
        Some(_) => None,
    }
}

fn gap_summary(s: &SteklovSpectrum, st: &SteklovSpectrum, eps: f64) -> GapSummary {
    let c = spectra_close(s, st, &[eps]);
    GapSummary {
        holds: c.holds,
        max_gap: c.max_gap(),
        ambiguous: c.ambiguous,
        pairing_from: pairing_from(s, st),
    }
}

struct Norms {
    l2: f64,
    sup: f64,
    h1: f64,
    integral: f64,
}

fn gap_norms(q: &Potential, qt: &Potential) -> Norms {
    let (xs, ws) = gauss_legendre_on(NORM_NODES, 0.0, 1.0);
    let dq = q.series.derivative();
    let dqt = qt.series.derivative();
    let mut l2 = 0.0;
    let mut d2 = 0.0;
    let mut integral = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let l = q.eval(*x) - qt.eval(*x);
        let dl = dq.eval(*x) - dqt.eval(*x);
        l2 += w * l * l;
        d2 += w * dl * dl;
        integral += w * l;
    }
    let sup = (0..=SUP_GRID)
        .map(|k| {
            let x = k as f64 / SUP_GRID as f64;
            (q.eval(x) - qt.eval(x)).abs()
        })
        .fold(0.0, f64::max);
    Norms {
        l2: l2.sqrt(),
        sup,
        h1: (l2 + d2).sqrt(),
        integral,
    }
}

fn factor_sup_gap(f: &ConformalFactor, ft: &ConformalFactor) -> f64 {
    (0..=SUP_GRID)
        .map(|k| {
            let x = k as f64 / SUP_GRID as f64;
            (f.eval(x) - ft.eval(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// max of ‖f‖, ‖f'‖, ‖f''‖, ‖f'''‖, ‖1/f‖ over both factors.
fn measured_class_a(f: &ConformalFactor, ft: &ConformalFactor, n: u32, omega: f64) -> Result<f64> {
    let mut a = 0.0f64;
    for g in [f, ft] {
        let r = class_membership(g, n, omega, f64::INFINITY, 1)?;
        a = r.norms.iter().fold(a, |m, v| m.max(*v));
        a = a.max(g.series.nth_derivative(3).sup_on_grid(SUP_GRID));
    }
    Ok(a)
}

/// (sup bound, derivative bound) on q − q̃ over C(A): (L_A, L'_A).
fn potential_gap_bounds(a: f64, n: u32, omega: f64) -> (f64, f64) {
    let p = (n as f64 - 2.0) / 4.0;
    let pp = (p * p - p).abs();
    let a2 = a * a;
    let q_a = p.abs() * a2 + pp * a2 * a2 + omega.abs() * a;
    let dq_a = p.abs() * (a2 + a2 * a2) + 2.0 * pp * a2 * (a2 + a2 * a2) + omega.abs() * a;
    (2.0 * q_a, 2.0 * dq_a)
}

/// sup over j > i of |∂_τ k(x_j, τ_i)| by forward differences.
fn kernel_tau_sup(op: &IntegralOperator) -> f64 {
    let n = op.grid_n;
    let mut s = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..=n {
            s = s.max(((op.at(i + 1, j) - op.at(i, j)) / op.spacing).abs());
        }
    }
    s
}

/// Operator-specific ingredients of the moment chain.
struct ChainSpec {
    sys: MuntzSystem,
    op: IntegralOperator,
    /// Sign of g on [1, 2]: −1 for B, +1 for D.
    tail_sign: f64,
    /// Spectral moments from the Weyl data, k = 0, 1, ….
    spectral: Vec<f64>,
    inverse_bound: f64,
}

fn run_chain(
    spec: ChainSpec,
    l_grid: &[f64],
    eps: f64,
    class_a: f64,
    n: u32,
    omega: f64,
) -> Result<ChainReport> {
    let ChainSpec {
        sys,
        op,
        tail_sign,
        spectral,
        inverse_bound,
    } = spec;
    let alpha = sys.alpha;
    let h_step = op.spacing;
    let ol = op.apply(l_grid)?;
    let g = |tau: f64| {
        if tau <= 1.0 {
            interp_uniform(&ol, 0.0, h_step, 1.0 - tau)
        } else if tau <= 2.0 {
            tail_sign * interp_uniform(&ol, 0.0, h_step, tau - 1.0)
        } else {
            0.0
        }
    };
    let h = |t: f64| {
        if t < E2 || t <= 0.0 {
            0.0
        } else {
            t.powf(alpha) * g(-t.ln())
        }
    };
    let breaks = [E2, E1];

    let c_shift = sys
        .lambdas
        .iter()
        .enumerate()
        .map(|(k, l)| l - 2.0 * k as f64)
        .fold(0.0, f64::max);
    let m1 = (2.0 * c_shift + 1.0).max(2.0);
    let trunc = truncation_rule(eps.max(1e-300), c_shift, m1);
    let m = trunc.m.min(sys.len() - 1);

    let (xs, ws) = panel_rule(QUAD_NODES, &breaks);
    let hv: Vec<f64> = xs.iter().map(|&t| h(t)).collect();
    let k_check = spectral.len().min(sys.len());
    let moments_quadrature: Vec<f64> = (0..k_check)
        .map(|k| {
            xs.iter()
                .zip(&ws)
                .zip(&hv)
                .map(|((x, w), v)| w * x.powf(sys.lambdas[k]) * v)
                .sum()
        })
        .collect();
    let spec_top = spectral.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let moment_mismatch = moments_quadrature
        .iter()
        .zip(&spectral)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / (spec_top + 1e-300);
    let eps_moment = (0..=m.min(k_check.saturating_sub(1)))
        .map(|k| {
            moments_quadrature[k]
                .abs()
                .max(spectral.get(k).map_or(0.0, |v| v.abs()))
        })
        .fold(0.0f64, f64::max);

    let cmat = gram_coefficients(&sys, m)?;
    let moments = moment_bound_with(eps_moment, &cmat, h, m, &breaks)?;
    let eps2 = blaschke_index(&sys, m).eps2_product;
    let u = eps2.min(0.999);
    let modulus = modulus_of_continuity(h, u);

    let (l_a, dl_a) = potential_gap_bounds(class_a, n, omega);
    let kernel_sup = op.norm_bound;
    let kernel_tau_sup = kernel_tau_sup(&op);
    let s = op.identity;
    let g_a = ((s + kernel_sup) * l_a).max(s * dl_a + kernel_sup * l_a + kernel_tau_sup * l_a);
    // jumps of h: 2|g(1)|e^{−α} at e^{−1} when the tail flips sign, |g(2)|e^{−2α} at e^{−2}
    let jumps = if tail_sign < 0.0 {
        2.0 * (-alpha).exp()
    } else {
        0.0
    } + (-2.0 * alpha).exp();
    let lip = (alpha.abs() + 1.0) * (2.0 * (1.0 - alpha)).exp().max(1.0);
    let modulus_class = g_a * (jumps * u.sqrt() + lip * u);

    let e2 = moments.approx_term.max(0.0).sqrt();
    let jackson = if modulus > 0.0 {
        e2 / modulus
    } else {
        f64::NAN
    };
    let jackson = if jackson.is_finite() { jackson } else { 1.0 };
    let h_bound = (moments.projection_term + (jackson * modulus_class).powi(2)).sqrt();
    let h_norm = moments.h_norm_sq.max(0.0).sqrt();

    let piece = |a: f64, b: f64| {
        let (x, w) = gauss_legendre_on(QUAD_NODES + 44, a, b);
        x.iter()
            .zip(&w)
            .map(|(x, w)| w * h(*x).powi(2))
            .sum::<f64>()
    };
    let (n1, n2) = (piece(E1, 1.0), piece(E2, E1));
    let pythagoras_defect = (moments.h_norm_sq - n1 - n2).abs() / moments.h_norm_sq.max(1e-300);

    let op_l_norm = l2_norm(&ol, h_step);
    let op_l_bound = (2.0 * alpha + 1.0).exp().max(1.0) * h_bound / 2f64.sqrt();

    let inv = invert_b(&op, &ol)?;
    let err: Vec<f64> = inv.h.iter().zip(l_grid).map(|(a, b)| a - b).collect();
    let ln = l2_norm(l_grid, h_step);
    let inversion_error = l2_norm(&err, h_step) / ln.max(1e-300);

    Ok(ChainReport {
        alpha,
        truncation_m: m,
        eps_too_large: trunc.eps_too_large,
        moments_quadrature,
        moments_spectral: spectral,
        moment_mismatch,
        eps_moment,
        moment_constant: if eps > 0.0 { eps_moment / eps } else { 0.0 },
        class_a,
        g_a,
        kernel_sup,
        kernel_tau_sup,
        eps2,
        modulus,
        modulus_class,
        jackson,
        moments,
        h_norm,
        h_bound,
        pythagoras_defect,
        op_l_norm,
        op_l_bound,
        inverse_bound,
        inversion_error,
    })
}

/// Spectral Steklov moments 2y e^{−2y}(Dir − Swp) at y = y_{m0+k}, k = 0..count.
fn steklov_spectral_moments(
    q: &Potential,
    qt: &Potential,
    sys: &MuntzSystem,
    count: usize,
) -> Result<Vec<f64>> {
    let ks: Vec<usize> = (0..count).collect();
    par::try_map(&ks, |&k| {
        let z = kappa(sys.n, sys.m0 + k as u32);
        let y = z.sqrt();
        let w = weyl_functions(q, z)?;
        let wt = weyl_functions(qt, z)?;
        let dd = w.delta * wt.delta;
        let one = ScaledValue::ONE;
        let dir = (dd * (w.m * w.n))
            .sub(&(wt.delta / w.delta))
            .sub(&(dd * (w.m * wt.n)))
            .add(&one);
        let swp = (dd * (wt.m * wt.n))
            .sub(&(w.delta / wt.delta))
            .sub(&(dd * (wt.m * w.n)))
            .add(&one);
        Ok((dir.sub(&swp) * ScaledValue::from_log(1.0, (2.0 * y).ln() - 2.0 * y)).to_f64())
    })
}

/// Spectral Calderón moments 2e^{−2y}[y²(Ñ − N)ΔΔ̃ + ½∫L] at y = y_k.
fn calderon_spectral_moments(
    q: &Potential,
    qt: &Potential,
    n: u32,
    count: usize,
    int_l: f64,
) -> Result<Vec<f64>> {
    let ks: Vec<u32> = (0..count as u32).collect();
    par::try_map(&ks, |&k| {
        let z = kappa(n, k);
        let y = z.sqrt();
        let w = weyl_functions(q, z)?;
        let wt = weyl_functions(qt, z)?;
        let cal = (w.delta * wt.delta) * ((wt.n - w.n) * z);
        let v = cal.add(&ScaledValue::from_f64(0.5 * int_l));
        Ok((v * ScaledValue::from_log(1.0, 2f64.ln() - 2.0 * y)).to_f64())
    })
}

fn factor_pathway(
    f: &ConformalFactor,
    ft: &ConformalFactor,
    n: u32,
    l2_true: f64,
    l2_chain: f64,
    tol: f64,
) -> Option<FactorPathway> {
    let p = (n as f64 - 2.0) / 4.0;
    let pair = |x: f64| {
        let [a, da, _] = f.jet(x);
        let [b, db, _] = ft.jet(x);
        (
            a.powf(p),
            p * a.powf(p - 1.0) * da,
            b.powf(p),
            p * b.powf(p - 1.0) * db,
        )
    };
    let wr = |x: f64| {
        let (fv, dfv, gv, dgv) = pair(x);
        gv * dfv - dgv * fv
    };
    let mut x0 = None;
    let mut prev = (0.0, wr(0.0));
    if prev.1 == 0.0 {
        x0 = Some(0.0);
    }
    for k in 1..=SUP_GRID {
        if x0.is_some() {
            break;
        }
        let x = k as f64 / SUP_GRID as f64;
        let v = wr(x);
        if v == 0.0 {
            x0 = Some(x);
        } else if v.signum() != prev.1.signum() {
            x0 = bisect(wr, prev.0, x, 1e-14);
        }
        prev = (x, v);
    }
    // F/F̃ = 1 needs an anchor: equal values at an endpoint
    let anchored = (f.eval(0.0) - ft.eval(0.0)).abs() <= tol * f.eval(0.0)
        || (f.eval(1.0) - ft.eval(1.0)).abs() <= tol * f.eval(1.0);
    if !anchored {
        return None;
    }
    let mut ff = 0.0f64;
    let mut inv2 = 0.0f64;
    let mut ft_sup = 0.0f64;
    for k in 0..=SUP_GRID {
        let (fv, _, gv, _) = pair(k as f64 / SUP_GRID as f64);
        ff = ff.max((fv * gv).abs());
        inv2 = inv2.max(1.0 / (gv * gv));
        ft_sup = ft_sup.max(ft.eval(k as f64 / SUP_GRID as f64));
    }
    let e = 1.0 / p;
    let to_f = |rho: f64| {
        if rho >= 1.0 {
            return f64::INFINITY;
        }
        let growth = (1.0 + rho).powf(e - 1.0).max((1.0 - rho).powf(e - 1.0));
        ft_sup * e * growth * rho
    };
    let ratio_bound = inv2 * ff * l2_true;
    Some(FactorPathway {
        x0,
        ratio_bound,
        f_gap_bound: to_f(ratio_bound),
        f_gap_bound_chain: to_f(inv2 * ff * l2_chain),
    })
}

fn ln_inv(eps: f64) -> f64 {
    (1.0 / eps.max(1e-16)).ln()
}

fn assertion(name: &str, ok: bool) -> (String, bool) {
    (name.to_string(), ok)
}

fn grid_values(q: &Potential, qt: &Potential, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let x = k as f64 / n as f64;
            q.eval(x) - qt.eval(x)
        })
        .collect()
}

/// Steklov chain for a pair of symmetric factors.
pub fn run_steklov_stability(
    f: &ConformalFactor,
    f_tilde: &ConformalFactor,
    n: u32,
    omega: f64,
    opts: &StabilityOptions,
) -> Result<ExperimentRecord> {
    require_symmetric(f, "f", opts.endpoint_tol)?;
    require_symmetric(f_tilde, "f_tilde", opts.endpoint_tol)?;
    let q = potential_from_factor(f, n, omega)?;
    let qt = potential_from_factor(f_tilde, n, omega)?;
    let s = steklov_spectrum(f, n, omega, opts.m_max)?;
    let st = steklov_spectrum(f_tilde, n, omega, opts.m_max)?;
    let eps = measure_epsilon(&s, &st);
    let spectral_gap_check = gap_summary(&s, &st, eps);
    let trace_det_gaps = weyl_rows(&s, &st);
    let top = &trace_det_gaps[trace_det_gaps.len() / 2..];
    let weyl_band = if eps > 0.0 && !top.is_empty() {
        let sc: Vec<f64> = top
            .iter()
            .map(|r| r.mn_gap / (eps * r.y.max(1.0)))
            .collect();
        Some((
            sc.iter().copied().fold(f64::INFINITY, f64::min),
            sc.iter().copied().fold(0.0, f64::max),
        ))
    } else {
        None
    };

    let norms = gap_norms(&q, &qt);
    let class_a = opts
        .class_a
        .unwrap_or(measured_class_a(f, f_tilde, n, omega)?);
    let kg = solve_kernel(&q, opts.kernel_grid, DEFAULT_TOL)?;
    let kgt = solve_kernel(&qt, opts.kernel_grid, DEFAULT_TOL)?;
    let b = build_b(&kg, &kgt)?;
    let big_k = b.norm_bound;
    let sys = muntz_sequence(n, 1, opts.m_max.max(2))?;
    let trunc_guess = {
        let c = sys
            .lambdas
            .iter()
            .enumerate()
            .map(|(k, l)| l - 2.0 * k as f64)
            .fold(0.0, f64::max);
        truncation_rule(eps.max(1e-300), c, (2.0 * c + 1.0).max(2.0)).m
    };
    let count = (trunc_guess.max(3) + 1).min(sys.len());
    let spectral = steklov_spectral_moments(&q, &qt, &sys, count)?;
    let spec = ChainSpec {
        sys,
        op: b,
        tail_sign: -1.0,
        spectral,
        inverse_bound: 1.0 + big_k * big_k.exp(),
    };
    let l_grid = grid_values(&q, &qt, opts.kernel_grid);
    let chain = run_chain(spec, &l_grid, eps, class_a, n, omega)?;
    let q_gap_l2 = chain.inverse_bound * chain.op_l_bound;

    let f_gap_sup = factor_sup_gap(f, f_tilde);
    let pathway = if omega == 0.0 && n >= 3 {
        factor_pathway(f, f_tilde, n, norms.l2, q_gap_l2, opts.endpoint_tol)
    } else {
        None
    };
    let mut assertions = vec![
        assertion("moment_projection_bound", chain.moments.bound_holds),
        assertion(
            "h_norm_within_chain_bound",
            chain.h_norm <= chain.h_bound * (1.0 + 1e-9),
        ),
        assertion(
            "modulus_within_class_bound",
            chain.modulus <= chain.modulus_class * (1.0 + 1e-9),
        ),
        assertion("pythagoras", chain.pythagoras_defect < 1e-6),
        assertion(
            "inversion_round_trip",
            norms.l2 == 0.0 || chain.inversion_error < 1e-6,
        ),
        assertion("true_gap_within_chain_bound", norms.l2 <= q_gap_l2),
        assertion("sup_within_sobolev", norms.sup <= 2.0 * norms.h1 + 1e-14),
    ];
    if let Some(p) = &pathway {
        assertions.push(assertion(
            "factor_pathway",
            f_gap_sup <= p.f_gap_bound * (1.0 + 1e-9) + 1e-14,
        ));
    }
    Ok(ExperimentRecord {
        mode: Mode::Steklov,
        n,
        omega,
        eps,
        spectral_gap_check,
        trace_det_gaps,
        weyl_band,
        n_gaps: vec![],
        chain,
        q_gap_l2,
        q_gap_l2_true: norms.l2,
        q_gap_sup: norms.sup,
        q_gap_h1: norms.h1,
        f_gap_sup,
        pathway,
        bound_product: q_gap_l2 * ln_inv(eps),
        assertions,
    })
}

/// Calderón chain; the factors must agree at both endpoints.
pub fn run_calderon_stability(
    f: &ConformalFactor,
    f_tilde: &ConformalFactor,
    n: u32,
    omega: f64,
    opts: &StabilityOptions,
) -> Result<ExperimentRecord> {
    let rep = calderon_norm_difference(f, f_tilde, n, omega, opts.m_max)?;
    let scale = f.eval(0.0).max(f.eval(1.0));
    let mismatch = rep
        .endpoint_gaps
        .iter()
        .any(|g| g.abs() > opts.endpoint_tol * scale);
    if mismatch || rep.diverging {
        return Err(LabError::Diverging(format!(
            "endpoint gaps of 1/sqrt(f): {:.3e}, {:.3e}; block-norm slope {:.3e}",
            rep.endpoint_gaps[0], rep.endpoint_gaps[1], rep.slope
        )));
    }
    let q = potential_from_factor(f, n, omega)?;
    let qt = potential_from_factor(f_tilde, n, omega)?;
    let norms = gap_norms(&q, &qt);
    let eps = norms.integral.abs() + rep.norm;

    let s = steklov_spectrum(f, n, omega, opts.m_max)?;
    let st = steklov_spectrum(f_tilde, n, omega, opts.m_max)?;
    let spectral_gap_check = gap_summary(&s, &st, measure_epsilon(&s, &st));
    let n_gaps: Vec<(u32, f64)> = s
        .blocks
        .iter()
        .zip(&st.blocks)
        .zip(&s.rows)
        .map(|((b, bt), r)| (r.m, (b.n_weyl - bt.n_weyl).abs()))
        .collect();

    let class_a = opts
        .class_a
        .unwrap_or(measured_class_a(f, f_tilde, n, omega)?);
    let kg = solve_kernel(&q, opts.kernel_grid, DEFAULT_TOL)?;
    let kgt = solve_kernel(&qt, opts.kernel_grid, DEFAULT_TOL)?;
    let d = build_d(&kg, &kgt)?;
    let kd = 2.0 * d.norm_bound;
    let sys = muntz_sequence(n, 0, opts.m_max.max(2))?;
    let trunc_guess = {
        let c = sys
            .lambdas
            .iter()
            .enumerate()
            .map(|(k, l)| l - 2.0 * k as f64)
            .fold(0.0, f64::max);
        truncation_rule(eps.max(1e-300), c, (2.0 * c + 1.0).max(2.0)).m
    };
    let count = (trunc_guess.max(3) + 1).min(sys.len());
    let spectral = calderon_spectral_moments(&q, &qt, n, count, norms.integral)?;
    let spec = ChainSpec {
        sys,
        op: d,
        tail_sign: 1.0,
        spectral,
        inverse_bound: 2.0 * (1.0 + kd * kd.exp()),
    };
    let l_grid = grid_values(&q, &qt, opts.kernel_grid);
    let chain = run_chain(spec, &l_grid, eps, class_a, n, omega)?;
    let q_gap_l2 = chain.inverse_bound * chain.op_l_bound;
    let f_gap_sup = factor_sup_gap(f, f_tilde);
    let pathway = if omega == 0.0 && n >= 3 {
        factor_pathway(f, f_tilde, n, norms.l2, q_gap_l2, opts.endpoint_tol)
    } else {
        None
    };
    let mut assertions = vec![
        assertion("moment_projection_bound", chain.moments.bound_holds),
        assertion(
            "h_norm_within_chain_bound",
            chain.h_norm <= chain.h_bound * (1.0 + 1e-9),
        ),
        assertion(
            "modulus_within_class_bound",
            chain.modulus <= chain.modulus_class * (1.0 + 1e-9),
        ),
        assertion("pythagoras", chain.pythagoras_defect < 1e-6),
        assertion(
            "inversion_round_trip",
            norms.l2 == 0.0 || chain.inversion_error < 1e-6,
        ),
        assertion("true_gap_within_chain_bound", norms.l2 <= q_gap_l2),
    ];
    if let Some(p) = &pathway {
        assertions.push(assertion(
            "factor_pathway",
            f_gap_sup <= p.f_gap_bound * (1.0 + 1e-9) + 1e-14,
        ));
    }
    Ok(ExperimentRecord {
        mode: Mode::Calderon,
        n,
        omega,
        eps,
        spectral_gap_check,
        trace_det_gaps: vec![],
        weyl_band: None,
        n_gaps,
        chain,
        q_gap_l2,
        q_gap_l2_true: norms.l2,
        q_gap_sup: norms.sup,
        q_gap_h1: norms.h1,
        f_gap_sup,
        pathway,
        bound_product: q_gap_l2 * ln_inv(eps),
        assertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{perturbed, pinned_asymmetric_bump, symmetric_base, symmetric_bump};

    fn small() -> StabilityOptions {
        StabilityOptions {
            m_max: 12,
            kernel_grid: 64,
            ..Default::default()
        }
    }

    #[test]
    fn identical_factors() {
        let f = ConformalFactor::from_form(symmetric_base(), 64).unwrap();
        let r = run_steklov_stability(&f, &f, 3, 0.0, &small()).unwrap();
        assert_eq!(r.eps, 0.0);
        assert_eq!(r.q_gap_l2_true, 0.0);
        assert!(r
            .trace_det_gaps
            .iter()
            .all(|g| g.mn_gap == 0.0 && g.trace_gap == 0.0));
        assert!(
            r.all_passed(),
            "{:?} {:?}",
            r.assertions,
            (
                r.chain.pythagoras_defect,
                r.chain.moment_mismatch,
                r.chain.inversion_error,
                r.q_gap_l2,
                r.q_gap_l2_true,
                r.eps,
                r.chain.truncation_m
            )
        );
    }

    #[test]
    fn asymmetric_rejected() {
        let f =
            ConformalFactor::from_form(crate::FactorForm::Affine { a: 1.0, b: 0.3 }, 64).unwrap();
        let g = ConformalFactor::constant(1.0).unwrap();
        assert!(matches!(
            discrete_weyl_gaps(&f, &g, 3, 0.0, (0, 5)),
            Err(LabError::Precondition(_))
        ));
    }

    #[test]
    fn symmetric_bump_chain() {
        let base = symmetric_base();
        let f = ConformalFactor::from_form(base.clone(), 64).unwrap();
        let ft = perturbed(&base, symmetric_bump(1e-2)).unwrap();
        let r = run_steklov_stability(&f, &ft, 3, 0.0, &small()).unwrap();
        assert!(r.eps > 0.0 && r.q_gap_l2_true > 0.0);
        assert!(
            r.chain.moment_mismatch < 1e-3,
            "{}",
            r.chain.moment_mismatch
        );
        assert!(
            r.all_passed(),
            "{:?} {:?}",
            r.assertions,
            (
                r.chain.pythagoras_defect,
                r.chain.moment_mismatch,
                r.chain.inversion_error,
                r.q_gap_l2,
                r.q_gap_l2_true,
                r.eps,
                r.chain.truncation_m
            )
        );
    }

    #[test]
    fn calderon_pinned_pair() {
        let base = symmetric_base();
        let f = ConformalFactor::from_form(base.clone(), 64).unwrap();
        let ft = perturbed(&base, pinned_asymmetric_bump(1e-2)).unwrap();
        let r = run_calderon_stability(&f, &ft, 3, 0.0, &small()).unwrap();
        assert!(
            r.chain.moment_mismatch < 1e-3,
            "{}",
            r.chain.moment_mismatch
        );
        assert!(
            r.all_passed(),
            "{:?} {:?}",
            r.assertions,
            (
                r.chain.pythagoras_defect,
                r.chain.moment_mismatch,
                r.chain.inversion_error,
                r.q_gap_l2,
                r.q_gap_l2_true,
                r.eps,
                r.chain.truncation_m
            )
        );
        let g =
            ConformalFactor::from_form(crate::FactorForm::Affine { a: 1.2, b: -0.2 }, 64).unwrap();
        assert!(matches!(
            run_calderon_stability(&f, &g, 3, 0.0, &small()),
            Err(LabError::Diverging(_))
        ));
    }
}
