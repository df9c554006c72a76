//! Fundamental solutions of −u'' + q u = −z u and the Weyl–Titchmarsh data
//! M, N, Δ built from them.

mod rk;
mod scaled;

pub use rk::{integrate_pair, PairTrajectory, RENORM_LOG};
pub use scaled::{LogSum, ScaledValue};

use crate::error::{LabError, Result};
use crate::geometry::Potential;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RTOL: f64 = 1e-11;
pub const CHECKPOINTS: usize = 32;
const POLE_LOG_GAP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { rtol: DEFAULT_RTOL }
    }
}

/// Endpoint values of c₀, s₀ (started at 0) and c₁, s₁ (started at 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub z: f64,
    pub c0_1: ScaledValue,
    pub c0p_1: ScaledValue,
    pub s0_1: ScaledValue,
    pub s0p_1: ScaledValue,
    pub c1_0: ScaledValue,
    pub c1p_0: ScaledValue,
    pub s1_0: ScaledValue,
    pub s1p_0: ScaledValue,
    /// Wronskians W(c₀,s₁), W(c₁,s₀), W(s₀,s₁) evaluated at x = 1/2.
    pub d_mid: ScaledValue,
    pub e_mid: ScaledValue,
    pub delta: ScaledValue,
    /// max over checkpoints of ln(|s₀| + |s₀'|/k).
    pub log_typical: f64,
    /// max over checkpoints and both pairs of |W − 1|/(|u₁v₂'| + |u₁'v₂|).
    pub wronskian_drift: f64,
    /// max over both pairs of the unscaled |W − 1| at the far endpoint.
    pub wronskian_raw: f64,
    pub renormalizations: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylData {
    pub z: f64,
    pub m: f64,
    pub n: f64,
    pub delta: ScaledValue,
    pub inv_delta: ScaledValue,
    pub ends: Endpoints,
    /// Scaled Wronskian residual (the raw one is in `ends.wronskian_raw`).
    pub wronskian_residual: f64,
    /// Relative residuals of s₀(1) = Δ, s₀'(1) = −NΔ, c₀(1) = −MΔ, c₀'(1) = MNΔ − 1/Δ.
    pub relation_residuals: [f64; 4],
}

fn sv(v: f64, log: f64) -> ScaledValue {
    ScaledValue::new(v, log)
}

/// Checkpoints: 32 interior points on a uniform grid, always including 1/2.
fn checkpoints() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=CHECKPOINTS)
        .map(|i| i as f64 / (CHECKPOINTS as f64 + 1.0))
        .collect();
    v.push(0.5);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

fn wronskian_defect(st: &[f64; 4], log: f64) -> f64 {
    let a = sv(st[0] * st[3], 2.0 * log);
    let b = sv(st[1] * st[2], 2.0 * log);
    let w = a.sub(&b);
    let d = w.sub(&ScaledValue::ONE);
    let scale = a.abs().add(&b.abs());
    if d.is_zero() {
        0.0
    } else {
        (d.ln_abs() - scale.ln_abs().max(0.0)).exp()
    }
}

pub fn fundamental_solutions(q: &Potential, z: f64) -> Result<Endpoints> {
    fundamental_solutions_with(q, z, SolverOptions::default())
}

pub fn fundamental_solutions_with(q: &Potential, z: f64, opts: SolverOptions) -> Result<Endpoints> {
    let k = z.abs().max(1.0).sqrt();
    let mut fwd = checkpoints();
    fwd.push(1.0);
    let left = integrate_pair(|x| q.eval(x), z, 0.0, [1.0, 0.0, 0.0, 1.0], &fwd, opts.rtol)?;
    let mut bwd: Vec<f64> = checkpoints().into_iter().rev().collect();
    bwd.push(0.0);
    let right = integrate_pair(|x| q.eval(x), z, 1.0, [1.0, 0.0, 0.0, 1.0], &bwd, opts.rtol)?;

    let mid_l = left
        .xs
        .iter()
        .position(|&x| x == 0.5)
        .expect("midpoint checkpoint");
    let mid_r = right
        .xs
        .iter()
        .position(|&x| x == 0.5)
        .expect("midpoint checkpoint");
    let (l, ll) = (left.states[mid_l], left.log_scales[mid_l]);
    let (r, lr) = (right.states[mid_r], right.log_scales[mid_r]);
    // W(u, v) = u v' − u' v
    let w = |u: f64, du: f64, v: f64, dv: f64| sv(u * dv, ll + lr).sub(&sv(du * v, ll + lr));
    let d_mid = w(l[0], l[1], r[2], r[3]);
    let e_mid = w(r[0], r[1], l[2], l[3]);
    let delta = w(l[2], l[3], r[2], r[3]);

    let mut log_typical = f64::NEG_INFINITY;
    let mut drift = 0.0f64;
    for (st, &lg) in left.states.iter().zip(&left.log_scales) {
        let t = (st[2].abs() + st[3].abs() / k).ln() + lg;
        log_typical = log_typical.max(t);
        drift = drift.max(wronskian_defect(st, lg));
    }
    for (st, &lg) in right.states.iter().zip(&right.log_scales) {
        drift = drift.max(wronskian_defect(st, lg));
    }

    let le = *left.states.last().unwrap();
    let lle = *left.log_scales.last().unwrap();
    let re = *right.states.last().unwrap();
    let lre = *right.log_scales.last().unwrap();
    let raw = |st: &[f64; 4], lg: f64| {
        let w = sv(st[0] * st[3], 2.0 * lg).sub(&sv(st[1] * st[2], 2.0 * lg));
        w.sub(&ScaledValue::ONE).abs().to_f64()
    };

    Ok(Endpoints {
        z,
        c0_1: sv(le[0], lle),
        c0p_1: sv(le[1], lle),
        s0_1: sv(le[2], lle),
        s0p_1: sv(le[3], lle),
        c1_0: sv(re[0], lre),
        c1p_0: sv(re[1], lre),
        s1_0: sv(re[2], lre),
        s1p_0: sv(re[3], lre),
        d_mid,
        e_mid,
        delta,
        log_typical,
        wronskian_drift: drift,
        wronskian_raw: raw(&le, lle).max(raw(&re, lre)),
        renormalizations: left.renormalizations + right.renormalizations,
        steps: left.steps + right.steps,
    })
}

pub fn weyl_functions(q: &Potential, z: f64) -> Result<WeylData> {
    weyl_functions_with(q, z, SolverOptions::default())
}

pub fn weyl_functions_with(q: &Potential, z: f64, opts: SolverOptions) -> Result<WeylData> {
    let ends = fundamental_solutions_with(q, z, opts)?;
    let gap = ends.log_typical - ends.delta.ln_abs();
    if ends.delta.is_zero() || gap > POLE_LOG_GAP {
        return Err(LabError::PoleProximity { z, log_gap: gap });
    }
    let delta = ends.delta;
    let inv_delta = delta.recip();
    let m_sv = -(ends.d_mid / delta);
    let n_sv = -(ends.e_mid / delta);
    let m = m_sv.to_f64();
    let n = n_sv.to_f64();

    let rel = |a: &ScaledValue, b: &ScaledValue| a.rel_diff(b);
    let r0 = rel(&ends.s0_1, &delta);
    let r1 = rel(&ends.s0p_1, &-(n_sv * delta));
    let r2 = rel(&ends.c0_1, &-(m_sv * delta));
    let r3 = rel(&ends.c0p_1, &(m_sv * n_sv * delta).sub(&inv_delta));

    Ok(WeylData {
        z,
        m,
        n,
        delta,
        inv_delta,
        wronskian_residual: ends.wronskian_drift,
        relation_residuals: [r0, r1, r2, r3],
        ends,
    })
}

/// c₀(x, z), s₀(x, z) at each grid point (ascending, inside [0, 1]).
pub fn left_solutions_on_grid(
    q: &Potential,
    z: f64,
    xs: &[f64],
) -> Result<Vec<(ScaledValue, ScaledValue)>> {
    let stops: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    let traj = integrate_pair(
        |x| q.eval(x),
        z,
        0.0,
        [1.0, 0.0, 0.0, 1.0],
        &stops,
        DEFAULT_RTOL,
    )?;
    let mut out = Vec::with_capacity(xs.len());
    let mut it = traj.states.iter().zip(&traj.log_scales);
    for &x in xs {
        if x <= 0.0 {
            out.push((ScaledValue::ONE, ScaledValue::ZERO));
        } else {
            let (st, &lg) = it.next().expect("stop count");
            out.push((sv(st[0], lg), sv(st[2], lg)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_case_closed_forms() {
        let q = Potential::constant(0.0);
        let w = weyl_functions(&q, 1.0).unwrap();
        assert!((w.ends.s0_1.to_f64() - 1f64.sinh()).abs() < 1e-10);
        assert!((w.ends.c0_1.to_f64() - 1f64.cosh()).abs() < 1e-10);
        assert!((w.m + 1.0 / 1f64.tanh()).abs() < 1e-10);
        assert!((w.n - w.m).abs() < 1e-10);
        let w = weyl_functions(&q, 100.0).unwrap();
        assert!((w.m + 10.0 / 10f64.tanh()).abs() < 1e-9);
        let w = weyl_functions(&q, 0.0).unwrap();
        assert!((w.ends.s0_1.to_f64() - 1.0).abs() < 1e-12);
        assert!((w.ends.s0p_1.to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overflow_path() {
        let q = Potential::constant(0.0);
        let w = weyl_functions(&q, 1e4).unwrap();
        let expect = crate::numerics::ln_sinh(100.0) - 100f64.ln();
        assert!((w.ends.s0_1.ln_abs() - expect).abs() < 1e-9);
        assert!(w.relation_residuals.iter().all(|&r| r < 1e-8));
    }

    #[test]
    fn pole_detected_at_dirichlet_eigenvalue() {
        // −u'' = −z u with Dirichlet conditions: z = −π²
        let q = Potential::constant(0.0);
        let e = weyl_functions(&q, -std::f64::consts::PI.powi(2));
        assert!(matches!(e, Err(LabError::PoleProximity { .. })), "{e:?}");
    }
}
