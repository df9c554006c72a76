//! Dormand–Prince 5(4) for a pair of solutions of u'' = (q + z) u, carried
//! together with one shared logarithmic scale.

use crate::error::{LabError, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Renormalisation threshold e^{30}.
pub const RENORM_LOG: f64 = 30.0;

/// State (u₁, u₁', u₂, u₂') scaled by e^{log_scale}.
pub type PairState = [f64; 4];

#[derive(Debug, Clone)]
pub struct PairTrajectory {
    /// Stop points in integration order.
    pub xs: Vec<f64>,
    pub states: Vec<PairState>,
    pub log_scales: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
    pub renormalizations: usize,
}

#[inline]
fn rhs(qz: f64, y: &PairState) -> PairState {
    [y[1], qz * y[0], y[3], qz * y[2]]
}

#[inline]
fn axpy(y: &PairState, h: f64, terms: &[(f64, &PairState)]) -> PairState {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates from `x0` with initial state `init` through each point of
/// `stops` (monotone in the direction of travel), recording the state there.
pub fn integrate_pair<Q: Fn(f64) -> f64>(
    q: Q,
    z: f64,
    x0: f64,
    init: PairState,
    stops: &[f64],
    rtol: f64,
) -> Result<PairTrajectory> {
    let k = z.abs().max(1.0).sqrt();
    let mut traj = PairTrajectory {
        xs: Vec::with_capacity(stops.len()),
        states: Vec::with_capacity(stops.len()),
        log_scales: Vec::with_capacity(stops.len()),
        steps: 0,
        rejected: 0,
        renormalizations: 0,
    };
    let mut x = x0;
    let mut y = init;
    let mut log_scale = 0.0;
    let dir = match stops.last() {
        Some(&end) if end < x0 => -1.0,
        _ => 1.0,
    };
    let mut h = dir * (0.02 / k).min(0.05);
    let renorm = RENORM_LOG.exp();
    let mut k1 = rhs(q(x) + z, &y);

    for &stop in stops {
        while (stop - x) * dir > 0.0 {
            let mut last = false;
            if (x + h - stop) * dir >= 0.0 {
                h = stop - x;
                last = true;
            }
            let k2 = rhs(q(x + C2 * h) + z, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = rhs(q(x + C3 * h) + z, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(
                q(x + C4 * h) + z,
                &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = rhs(
                q(x + C5 * h) + z,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let xn = if last { stop } else { x + h };
            let k6 = rhs(
                q(xn) + z,
                &axpy(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let yn = axpy(
                &y,
                h,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let k7 = rhs(q(xn) + z, &yn);

            let mut err = 0.0f64;
            for p in 0..2 {
                let (u, du) = (2 * p, 2 * p + 1);
                let mag = (y[u].abs() + y[du].abs() / k).max(yn[u].abs() + yn[du].abs() / k);
                let eu = h
                    * (E1 * k1[u] + E3 * k3[u] + E4 * k4[u] + E5 * k5[u] + E6 * k6[u] + E7 * k7[u]);
                let ed = h
                    * (E1 * k1[du]
                        + E3 * k3[du]
                        + E4 * k4[du]
                        + E5 * k5[du]
                        + E6 * k6[du]
                        + E7 * k7[du]);
                err = err
                    .max(eu.abs() / (rtol * mag))
                    .max(ed.abs() / (rtol * k * mag));
            }

            if err <= 1.0 {
                x = xn;
                y = yn;
                k1 = k7;
                traj.steps += 1;
                let big = (y[0].abs() + y[1].abs() / k).max(y[2].abs() + y[3].abs() / k);
                if big > renorm {
                    for v in y.iter_mut() {
                        *v /= renorm;
                    }
                    for v in k1.iter_mut() {
                        *v /= renorm;
                    }
                    log_scale += RENORM_LOG;
                    traj.renormalizations += 1;
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    h *= fac;
                } else {
                    h = (h * fac).abs().max(1e-6) * dir;
                }
            } else {
                traj.rejected += 1;
                let fac = if err.is_finite() {
                    (0.9 * err.powf(-0.25)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                h *= fac;
            }
            if h.abs() < 1e-14 || traj.steps + traj.rejected > 50_000_000 {
                return Err(LabError::Integration {
                    x,
                    reason: format!("step size collapsed to {h:e} at z = {z}"),
                });
            }
        }
        traj.xs.push(stop);
        traj.states.push(y);
        traj.log_scales.push(log_scale);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_solutions_match_hyperbolic_closed_forms() {
        for &z in &[1.0f64, 100.0, 1e4] {
            let k = z.sqrt();
            let t =
                integrate_pair(|_| 0.0, z, 0.0, [1.0, 0.0, 0.0, 1.0], &[0.5, 1.0], 1e-11).unwrap();
            let s = t.states[1];
            let l = t.log_scales[1];
            let c = (s[0].abs().ln() + l) - crate::numerics::ln_cosh(k);
            let sn = (s[2].abs().ln() + l) - (crate::numerics::ln_sinh(k) - k.ln());
            assert!(c.abs() < 2e-9, "z={z} cosh log error {c}");
            assert!(sn.abs() < 2e-9, "z={z} sinh log error {sn}");
        }
    }

    #[test]
    fn backward_integration() {
        let t = integrate_pair(|_| 0.0, 4.0, 1.0, [1.0, 0.0, 0.0, 1.0], &[0.0], 1e-11).unwrap();
        let s = t.states[0];
        assert!((s[0] - 2f64.cosh()).abs() < 1e-9);
        assert!((s[2] + 2f64.sinh() / 2.0).abs() < 1e-9);
    }
}
