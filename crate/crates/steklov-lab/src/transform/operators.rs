use super::kernel::KernelGrid;
use crate::error::{LabError, Result};
use crate::geometry::Potential;
use crate::numerics::{composite_weights, ln_cosh, ln_sinh};
use crate::ode::{left_solutions_on_grid, LogSum, ScaledValue};
use crate::par;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Q,
    R,
    B,
    D,
    C,
    H1,
}

/// (Af)(τ) = identity·f(τ) + ∫_τ^1 k(x, τ) f(x) dx on the nodes τ_i = i/N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralOperator {
    pub kind: OperatorKind,
    pub grid_n: usize,
    pub spacing: f64,
    pub identity: f64,
    /// kernel[i * (N + 1) + j] = k(x_j, τ_i), used for j ≥ i.
    pub kernel: Vec<f64>,
    /// sup |k|.
    pub norm_bound: f64,
}

impl IntegralOperator {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * (self.grid_n + 1) + j]
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid_n;
        if f.len() != n + 1 {
            return Err(LabError::Dimension(format!(
                "operator on {} nodes applied to {} samples",
                n + 1,
                f.len()
            )));
        }
        let idx: Vec<usize> = (0..=n).collect();
        Ok(par::map(&idx, |&i| {
            let w = composite_weights(n - i, self.spacing);
            let row = &self.kernel[i * (n + 1)..(i + 1) * (n + 1)];
            let tail: f64 = (i..=n).map(|j| w[j - i] * row[j] * f[j]).sum();
            self.identity * f[i] + tail
        }))
    }

    /// The Volterra part C = A − identity·I.
    pub fn volterra_part(&self) -> IntegralOperator {
        IntegralOperator {
            kind: OperatorKind::C,
            identity: 0.0,
            ..self.clone()
        }
    }

    /// The kernel H₁ of the Volterra part, as an operator with the same integral action.
    pub fn kernel_operator(&self) -> IntegralOperator {
        IntegralOperator {
            kind: OperatorKind::H1,
            identity: 0.0,
            ..self.clone()
        }
    }

    fn sum(&self, other: &IntegralOperator, kind: OperatorKind) -> IntegralOperator {
        let kernel: Vec<f64> = self
            .kernel
            .iter()
            .zip(&other.kernel)
            .map(|(a, b)| a + b)
            .collect();
        let norm_bound = sup_upper(&kernel, self.grid_n);
        IntegralOperator {
            kind,
            grid_n: self.grid_n,
            spacing: self.spacing,
            identity: self.identity + other.identity,
            kernel,
            norm_bound,
        }
    }
}

fn sup_upper(kernel: &[f64], n: usize) -> f64 {
    let mut s = 0.0f64;
    for i in 0..=n {
        for j in i..=n {
            s = s.max(kernel[i * (n + 1) + j].abs());
        }
    }
    s
}

fn check_grids(a: &KernelGrid, b: &KernelGrid) -> Result<()> {
    if a.grid_n != b.grid_n {
        return Err(LabError::Dimension(format!(
            "kernel grids differ: {} vs {}",
            a.grid_n, b.grid_n
        )));
    }
    Ok(())
}

/// k(x_j, τ_i) = A(x, 2τ−x) + G(x, 2τ−x) + ∫ A(x, 2τ−t) G(x, t) dt over [max(0, 2τ−x), min(2τ, x)]
///   + 1_{x ≥ 2τ} ∫_{2τ}^x [c_a A(x, t) G(x, t−2τ) + c_b A(x, t−2τ) G(x, t)] dt.
fn mixed_kernel<A, G>(n: usize, h: f64, first: A, second: G, c_a: f64, c_b: f64) -> Vec<f64>
where
    A: Fn(usize, isize) -> f64 + Sync,
    G: Fn(usize, isize) -> f64 + Sync,
{
    let wts: Vec<Vec<f64>> = (0..=n).map(|c| composite_weights(c, h)).collect();
    let idx: Vec<usize> = (0..=n).collect();
    let rows = par::map(&idx, |&i| {
        let mut row = vec![0.0; n + 1];
        let ti = 2 * i as isize;
        for j in i..=n {
            let ji = j as isize;
            let a = ti - ji;
            let mut v = first(j, a) + second(j, a);
            let lo = a.max(0);
            let hi = ti.min(ji);
            if hi > lo {
                let w = &wts[(hi - lo) as usize];
                let mut s = 0.0;
                for l in lo..=hi {
                    s += w[(l - lo) as usize] * first(j, ti - l) * second(j, l);
                }
                v += s;
            }
            if ti < ji {
                let w = &wts[(ji - ti) as usize];
                let mut s = 0.0;
                for l in ti..=ji {
                    let wl = w[(l - ti) as usize];
                    s += wl
                        * (c_a * first(j, l) * second(j, l - ti)
                            + c_b * first(j, l - ti) * second(j, l));
                }
                v += s;
            }
            row[j] = v;
        }
        row
    });
    rows.concat()
}

fn operator(
    kind: OperatorKind,
    n: usize,
    h: f64,
    identity: f64,
    kernel: Vec<f64>,
) -> IntegralOperator {
    let norm_bound = sup_upper(&kernel, n);
    IntegralOperator {
        kind,
        grid_n: n,
        spacing: h,
        identity,
        kernel,
        norm_bound,
    }
}

/// Q pairs s₀ (kernel H of `kg`) with c̃₀ (kernel P̃ of `kg_tilde`).
pub fn build_q(kg: &KernelGrid, kg_tilde: &KernelGrid) -> Result<IntegralOperator> {
    check_grids(kg, kg_tilde)?;
    let k = mixed_kernel(
        kg.grid_n,
        kg.spacing,
        |j, a| kg_tilde.p(j, a),
        |j, a| kg.h(j, a),
        -1.0,
        1.0,
    );
    Ok(operator(OperatorKind::Q, kg.grid_n, kg.spacing, 0.5, k))
}

/// R pairs c₀ (kernel P of `kg`) with s̃₀ (kernel H̃ of `kg_tilde`).
pub fn build_r(kg: &KernelGrid, kg_tilde: &KernelGrid) -> Result<IntegralOperator> {
    check_grids(kg, kg_tilde)?;
    let k = mixed_kernel(
        kg.grid_n,
        kg.spacing,
        |j, a| kg.p(j, a),
        |j, a| kg_tilde.h(j, a),
        -1.0,
        1.0,
    );
    Ok(operator(OperatorKind::R, kg.grid_n, kg.spacing, 0.5, k))
}

/// B = Q + R, satisfying ∫₀¹[c₀s̃₀ + c̃₀s₀]L = (1/y)∫₀¹ sinh(2τy) BL(τ) dτ.
pub fn build_b(kg: &KernelGrid, kg_tilde: &KernelGrid) -> Result<IntegralOperator> {
    Ok(build_q(kg, kg_tilde)?.sum(&build_r(kg, kg_tilde)?, OperatorKind::B))
}

/// D from the H, H̃ kernels, satisfying y²∫₀¹ L s₀s̃₀ = ∫₀¹ cosh(2τy) DL(τ) dτ − ½∫₀¹ L.
pub fn build_d(kg: &KernelGrid, kg_tilde: &KernelGrid) -> Result<IntegralOperator> {
    check_grids(kg, kg_tilde)?;
    let k = mixed_kernel(
        kg.grid_n,
        kg.spacing,
        |j, a| kg_tilde.h(j, a),
        |j, a| kg.h(j, a),
        -1.0,
        -1.0,
    );
    Ok(operator(OperatorKind::D, kg.grid_n, kg.spacing, 0.5, k))
}

/// Discrete L² norm on the uniform grid.
pub fn l2_norm(f: &[f64], h: f64) -> f64 {
    let w = composite_weights(f.len() - 1, h);
    f.iter()
        .zip(&w)
        .map(|(v, w)| w * v * v)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub h: Vec<f64>,
    /// Sup-norms of the Neumann terms C^n g.
    pub term_norms: Vec<f64>,
    /// ‖Bh − g‖₂ / ‖g‖₂.
    pub residual: f64,
}

const NEUMANN_CUTOFF: f64 = 1e-12;
const NEUMANN_PATIENCE: usize = 30;
const NEUMANN_MAX: usize = 400;

/// h = Σ (−1)ⁿ Cⁿ g for B = I + C.
pub fn invert_b(b: &IntegralOperator, g: &[f64]) -> Result<InversionReport> {
    let c = b.volterra_part();
    let scale = if b.identity != 0.0 { b.identity } else { 1.0 };
    let mut term: Vec<f64> = g.iter().map(|v| v / scale).collect();
    let mut h = term.clone();
    let mut term_norms = vec![sup(&term)];
    let floor = NEUMANN_CUTOFF * sup(g).max(1.0);
    let mut n = 0;
    while *term_norms.last().unwrap() >= floor {
        n += 1;
        let next = c.apply(&term)?;
        term = next.iter().map(|v| -v / scale).collect();
        let t = sup(&term);
        if n > NEUMANN_PATIENCE && t >= term_norms[n - 1] || n > NEUMANN_MAX {
            return Err(LabError::Inversion { term: n, norm: t });
        }
        term_norms.push(t);
        for (a, b) in h.iter_mut().zip(&term) {
            *a += b;
        }
    }
    let bh = b.apply(&h)?;
    let diff: Vec<f64> = bh.iter().zip(g).map(|(a, b)| a - b).collect();
    let gn = l2_norm(g, b.spacing);
    let residual = if gn > 0.0 {
        l2_norm(&diff, b.spacing) / gn
    } else {
        l2_norm(&diff, b.spacing)
    };
    Ok(InversionReport {
        h,
        term_norms,
        residual,
    })
}

fn grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

fn weighted_sum(terms: impl Iterator<Item = ScaledValue>) -> ScaledValue {
    let mut s = LogSum::new();
    for t in terms {
        s.push(t);
    }
    s.value()
}

fn rel(a: &ScaledValue, b: &ScaledValue) -> f64 {
    let den = a.abs().add(&b.abs());
    if den.is_zero() {
        0.0
    } else {
        (a.sub(b) / den).to_f64().abs()
    }
}

/// Relative gap in ∫₀¹[c₀s̃₀ + c̃₀s₀]L = (1/y)∫₀¹ sinh(2τy) BL(τ) dτ, with L given on the operator grid.
pub fn b_identity_residual(
    b: &IntegralOperator,
    q: &Potential,
    q_tilde: &Potential,
    l: &[f64],
    y: f64,
) -> Result<f64> {
    let n = b.grid_n;
    let xs = grid(n);
    let z = y * y;
    let a = left_solutions_on_grid(q, z, &xs)?;
    let at = left_solutions_on_grid(q_tilde, z, &xs)?;
    let w = composite_weights(n, b.spacing);
    let lhs = weighted_sum((0..=n).map(|k| {
        let (c0, s0) = a[k];
        let (ct, st) = at[k];
        (c0 * st).add(&(ct * s0)) * (w[k] * l[k])
    }));
    let bl = b.apply(l)?;
    let rhs = weighted_sum((1..=n).map(|k| {
        ScaledValue::from_log(
            (w[k] * bl[k]).signum(),
            (w[k] * bl[k]).abs().ln() + ln_sinh(2.0 * y * xs[k]) - y.ln(),
        )
    }));
    Ok(rel(&lhs, &rhs))
}

/// Relative gap in y²∫₀¹ L s₀s̃₀ = ∫₀¹ cosh(2τy) DL(τ) dτ − ½∫₀¹ L.
pub fn d_identity_residual(
    d: &IntegralOperator,
    q: &Potential,
    q_tilde: &Potential,
    l: &[f64],
    y: f64,
) -> Result<f64> {
    let n = d.grid_n;
    let xs = grid(n);
    let z = y * y;
    let a = left_solutions_on_grid(q, z, &xs)?;
    let at = left_solutions_on_grid(q_tilde, z, &xs)?;
    let w = composite_weights(n, d.spacing);
    let lhs = weighted_sum((0..=n).map(|k| (a[k].1 * at[k].1) * (z * w[k] * l[k])));
    let dl = d.apply(l)?;
    let mut rhs = LogSum::new();
    for k in 0..=n {
        let v = w[k] * dl[k];
        rhs.push_log(v.signum(), v.abs().ln() + ln_cosh(2.0 * y * xs[k]));
        rhs.push(ScaledValue::from_f64(-0.5 * w[k] * l[k]));
    }
    Ok(rel(&lhs, &rhs.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{solve_kernel, DEFAULT_TOL};

    fn sample(q: &Potential, n: usize) -> Vec<f64> {
        grid(n).iter().map(|&x| q.eval(x)).collect()
    }

    #[test]
    fn free_kernels_give_identity() {
        let z = solve_kernel(&Potential::constant(0.0), 64, DEFAULT_TOL).unwrap();
        let b = build_b(&z, &z).unwrap();
        let l: Vec<f64> = grid(64).iter().map(|x| (3.0 * x).sin()).collect();
        assert_eq!(b.apply(&l).unwrap(), l);
        assert_eq!(b.apply(&vec![0.0; 65]).unwrap(), vec![0.0; 65]);
        let r = invert_b(&b, &l).unwrap();
        assert_eq!(r.h, l);
    }

    #[test]
    fn volterra_tail_vanishes() {
        let q = Potential::from_fn(|x| (std::f64::consts::PI * x).cos(), 32).unwrap();
        let kg = solve_kernel(&q, 64, DEFAULT_TOL).unwrap();
        let kz = solve_kernel(&Potential::constant(0.0), 64, DEFAULT_TOL).unwrap();
        let c = build_b(&kg, &kz).unwrap().volterra_part();
        let f: Vec<f64> = grid(64).iter().map(|x| 1.0 + x * x).collect();
        assert_eq!(c.apply(&f).unwrap()[64], 0.0);
    }

    #[test]
    fn b_identity_constant_potential() {
        let q = Potential::constant(1.0);
        let qt = Potential::constant(0.0);
        let n = 256;
        let b = build_b(
            &solve_kernel(&q, n, DEFAULT_TOL).unwrap(),
            &solve_kernel(&qt, n, DEFAULT_TOL).unwrap(),
        )
        .unwrap();
        let l = vec![1.0; n + 1];
        for y in [2.0, 3.0, 5.0] {
            let r = b_identity_residual(&b, &q, &qt, &l, y).unwrap();
            assert!(r < 1e-6, "y = {y}: {r}");
        }
    }

    #[test]
    fn b_and_d_identities_mixed_pair() {
        let q = Potential::from_fn(|x| (std::f64::consts::PI * x).cos(), 32).unwrap();
        let qt = Potential::from_fn(|x| 0.5 * x * x - 0.2, 32).unwrap();
        let n = 256;
        let kg = solve_kernel(&q, n, DEFAULT_TOL).unwrap();
        let kt = solve_kernel(&qt, n, DEFAULT_TOL).unwrap();
        let l: Vec<f64> = sample(&q, n)
            .iter()
            .zip(sample(&qt, n))
            .map(|(a, b)| a - b)
            .collect();
        let b = build_b(&kg, &kt).unwrap();
        let d = build_d(&kg, &kt).unwrap();
        for y in [2.0, 5.0, 10.0] {
            let rb = b_identity_residual(&b, &q, &qt, &l, y).unwrap();
            let rd = d_identity_residual(&d, &q, &qt, &l, y).unwrap();
            assert!(rb < 1e-6, "B, y = {y}: {rb}");
            assert!(rd < 1e-6, "D, y = {y}: {rd}");
        }
    }

    #[test]
    fn neumann_round_trip() {
        let q = Potential::constant(1.0);
        let n = 128;
        let b = build_b(
            &solve_kernel(&q, n, DEFAULT_TOL).unwrap(),
            &solve_kernel(&Potential::constant(0.0), n, DEFAULT_TOL).unwrap(),
        )
        .unwrap();
        let l: Vec<f64> = grid(n).iter().map(|x| (2.0 * x).cos() + x).collect();
        let g = b.apply(&l).unwrap();
        let r = invert_b(&b, &g).unwrap();
        let err: Vec<f64> = r.h.iter().zip(&l).map(|(a, b)| a - b).collect();
        assert!(l2_norm(&err, b.spacing) <= 1e-8 * l2_norm(&l, b.spacing));
        assert!(r.residual < 1e-9);
    }
}
