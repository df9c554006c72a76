use crate::error::{LabError, Result};
use crate::geometry::Potential;
use crate::numerics::{composite_weights, gauss_legendre_on, ln_cosh, ln_sinh};
use crate::ode::{left_solutions_on_grid, LogSum, ScaledValue};
use serde::{Deserialize, Serialize};

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 200;

/// K(x, t) on the nodes x = k/N, t = l/N, |l| ≤ k ≤ N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelGrid {
    pub grid_n: usize,
    pub spacing: f64,
    /// rows[k][l + k] = K(x_k, t_l).
    pub rows: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Sup-change of the last Picard sweep.
    pub residual: f64,
    /// max_k |K(x_k, x_k) − ½∫₀^{x_k} q|.
    pub diagonal_error: f64,
    pub potential_tag: String,
    /// Largest excess of |K| over the Marchenko bound (≤ 0 when the bound holds).
    pub bound_excess: f64,
}

impl KernelGrid {
    #[inline]
    pub fn k(&self, k: usize, l: isize) -> f64 {
        self.rows[k][(l + k as isize) as usize]
    }

    /// H(x_k, t_l) = K(x, t) − K(x, −t); odd in t.
    #[inline]
    pub fn h(&self, k: usize, l: isize) -> f64 {
        self.k(k, l) - self.k(k, -l)
    }

    /// P(x_k, t_l) = K(x, t) + K(x, −t); even in t.
    #[inline]
    pub fn p(&self, k: usize, l: isize) -> f64 {
        self.k(k, l) + self.k(k, -l)
    }

    /// Sup-norm of K over the grid.
    pub fn sup(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Flat row-major copy of the triangle, row k holding 2k + 1 values.
    pub fn flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

/// Cumulative integrals of q on the u-grid: (½∫q, σ₀, σ₁), spacing 1/(2N).
fn cumulative(q: &Potential, cells: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hu = 1.0 / cells as f64;
    let (gx, gw) = gauss_legendre_on(6, 0.0, hu);
    let mut half = vec![0.0; cells + 1];
    let mut s0 = vec![0.0; cells + 1];
    let mut s1 = vec![0.0; cells + 1];
    for i in 1..=cells {
        let a = (i - 1) as f64 * hu;
        let mut iq = 0.0;
        let mut iabs = 0.0;
        let mut is0 = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            let v = q.eval(a + x);
            iq += w * v;
            iabs += w * v.abs();
        }
        // ∫ σ₀ over the cell: σ₀(a) h + ∫∫|q|, with the inner part from the same rule
        for (x, w) in gx.iter().zip(&gw) {
            let mut inner = 0.0;
            let (ix, iw) = gauss_legendre_on(4, 0.0, *x);
            for (y, v) in ix.iter().zip(&iw) {
                inner += v * q.eval(a + y).abs();
            }
            is0 += w * (s0[i - 1] + inner);
        }
        half[i] = half[i - 1] + 0.5 * iq;
        s0[i] = s0[i - 1] + iabs;
        s1[i] = s1[i - 1] + is0;
    }
    (half, s0, s1)
}

/// Solves the Goursat problem for J(u, v) = K(u + v, u − v) by implicit
/// trapezoid marching followed by Picard sweeps until the sup-change is below `tol`.
pub fn solve_kernel(q: &Potential, grid_n: usize, tol: f64) -> Result<KernelGrid> {
    if grid_n < 2 {
        return Err(LabError::Dimension(format!(
            "kernel grid {grid_n} too small"
        )));
    }
    let cells = 2 * grid_n;
    let hu = 1.0 / cells as f64;
    let c = 0.25 * hu * hu;
    let qx: Vec<f64> = (0..=cells).map(|s| q.eval(s as f64 * hu)).collect();
    let (half, _s0, s1) = cumulative(q, cells);

    // j ranges over 0..=cells − i in row i
    let mut jv: Vec<Vec<f64>> = (0..=cells).map(|i| vec![0.0; cells - i + 1]).collect();
    let mut iv: Vec<Vec<f64>> = jv.clone();
    for i in 0..=cells {
        jv[i][0] = half[i];
    }
    for i in 1..=cells {
        for j in 1..=(cells - i) {
            let g = |a: usize, b: usize, jv: &Vec<Vec<f64>>| qx[a + b] * jv[a][b];
            let rest = iv[i - 1][j] + iv[i][j - 1] - iv[i - 1][j - 1]
                + c * (g(i - 1, j, &jv) + g(i, j - 1, &jv) + g(i - 1, j - 1, &jv));
            let val = (half[i] + rest) / (1.0 - c * qx[i + j]);
            jv[i][j] = val;
            iv[i][j] = rest + c * qx[i + j] * val;
        }
    }

    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < MAX_SWEEPS {
        iterations += 1;
        let mut next = jv.clone();
        let mut cum: Vec<Vec<f64>> = jv.iter().map(|r| vec![0.0; r.len()]).collect();
        change = 0.0;
        for i in 1..=cells {
            for j in 1..=(cells - i) {
                let g = |a: usize, b: usize| qx[a + b] * jv[a][b];
                cum[i][j] = cum[i - 1][j] + cum[i][j - 1] - cum[i - 1][j - 1]
                    + c * (g(i, j) + g(i - 1, j) + g(i, j - 1) + g(i - 1, j - 1));
                next[i][j] = half[i] + cum[i][j];
                change = change.max((next[i][j] - jv[i][j]).abs());
            }
        }
        jv = next;
        if change < tol {
            break;
        }
    }
    if change >= tol {
        return Err(LabError::Iteration { iterations, change });
    }

    let mut rows = Vec::with_capacity(grid_n + 1);
    let mut diagonal_error = 0.0f64;
    let mut bound_excess = f64::NEG_INFINITY;
    let mut wmax = vec![0.0f64; cells + 1];
    for i in 1..=cells {
        wmax[i] = wmax[i - 1].max((2.0 * half[i]).abs());
    }
    for k in 0..=grid_n {
        let mut row = Vec::with_capacity(2 * k + 1);
        for l in -(k as isize)..=(k as isize) {
            let i = (k as isize + l) as usize;
            let j = (k as isize - l) as usize;
            let v = jv[i][j];
            row.push(v);
            let bound = 0.5 * wmax[i] * (s1[i + j] - s1[i] - s1[j]).exp();
            bound_excess = bound_excess.max(v.abs() - ((1.0 + 1e-9) * bound + 1e-12));
        }
        diagonal_error = diagonal_error.max((row[2 * k] - half[2 * k]).abs());
        rows.push(row);
    }
    Ok(KernelGrid {
        grid_n,
        spacing: 1.0 / grid_n as f64,
        rows,
        iterations,
        residual: change,
        diagonal_error,
        potential_tag: q.tag(),
        bound_excess,
    })
}

/// Exact ½∫₀^x q on the kernel's diagonal nodes, for independent checks.
pub fn half_integral(q: &Potential, x: f64) -> f64 {
    let (gx, gw) = gauss_legendre_on(64, 0.0, x);
    0.5 * gx.iter().zip(&gw).map(|(t, w)| w * q.eval(*t)).sum::<f64>()
}

/// (s₀, c₀) at x = x_k, z = y² rebuilt from the kernel, in log space.
pub fn represent(kg: &KernelGrid, y: f64, k: usize) -> (ScaledValue, ScaledValue) {
    let x = k as f64 * kg.spacing;
    let w = composite_weights(k, kg.spacing);
    let mut s = LogSum::new();
    let mut c = LogSum::new();
    if y == 0.0 {
        s.push(ScaledValue::from_f64(x));
        c.push(ScaledValue::ONE);
    } else {
        s.push_log(1.0, ln_sinh(y * x) - y.ln());
        c.push_log(1.0, ln_cosh(y * x));
    }
    for l in 0..=k {
        let t = l as f64 * kg.spacing;
        let hk = kg.h(k, l as isize);
        let pk = kg.p(k, l as isize);
        if y == 0.0 {
            s.push(ScaledValue::from_f64(w[l] * hk * t));
            c.push(ScaledValue::from_f64(w[l] * pk));
        } else {
            if t > 0.0 {
                s.push_log(
                    (w[l] * hk).signum(),
                    (w[l] * hk).abs().ln() + ln_sinh(y * t) - y.ln(),
                );
            }
            c.push_log(
                (w[l] * pk).signum(),
                (w[l] * pk).abs().ln() + ln_cosh(y * t),
            );
        }
    }
    (s.value(), c.value())
}

/// Relative residuals of the kernel representation of s₀ and c₀ against the ODE solver at x.
pub fn representation_check(kg: &KernelGrid, q: &Potential, z: f64, x: f64) -> Result<(f64, f64)> {
    let k = (x / kg.spacing).round() as usize;
    if (k as f64 * kg.spacing - x).abs() > 1e-12 || k > kg.grid_n {
        return Err(LabError::Dimension(format!(
            "x = {x} is not a kernel grid node"
        )));
    }
    let y = z.max(0.0).sqrt();
    let (s_rep, c_rep) = represent(kg, y, k);
    let ode = left_solutions_on_grid(q, z, &[x])?;
    let (c_ode, s_ode) = ode[0];
    Ok((s_rep.rel_diff(&s_ode), c_rep.rel_diff(&c_ode)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_gives_zero_kernel() {
        let kg = solve_kernel(&Potential::constant(0.0), 64, DEFAULT_TOL).unwrap();
        assert_eq!(kg.sup(), 0.0);
        assert_eq!(kg.iterations, 1);
    }

    #[test]
    fn constant_potential_diagonal() {
        let kg = solve_kernel(&Potential::constant(1.0), 64, DEFAULT_TOL).unwrap();
        for k in 0..=64 {
            let x = k as f64 / 64.0;
            assert!((kg.k(k, k as isize) - x / 2.0).abs() < 1e-12);
        }
        assert!(kg.bound_excess <= 0.0);
        for k in 1..=64 {
            for l in 0..=k as isize {
                assert!((kg.h(k, l) + kg.h(k, -l)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn representation_of_free_solutions() {
        let q = Potential::constant(0.0);
        let kg = solve_kernel(&q, 64, DEFAULT_TOL).unwrap();
        let (rs, rc) = representation_check(&kg, &q, 4.0, 1.0).unwrap();
        assert!(rs < 1e-10 && rc < 1e-10, "{rs} {rc}");
    }
}
