use crate::error::Result;
use crate::geometry::Potential;
use crate::numerics::gauss_legendre_on;
use crate::ode::{left_solutions_on_grid, weyl_functions, LogSum, ScaledValue};
use serde::{Deserialize, Serialize};

const NODES: usize = 512;

/// |LHS − RHS| / (|LHS| + |RHS| + 1) for each of the three identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// ΔΔ̃(MN − 1/Δ²) − MÑΔΔ̃ + 1 = ∫(q − q̃)c₀s̃₀.
    pub direct: f64,
    /// Same with the roles of q and q̃ exchanged.
    pub swapped: f64,
    /// (Ñ − N)ΔΔ̃ = ∫(q − q̃)s₀s̃₀.
    pub calderon: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.direct.max(self.swapped).max(self.calderon)
    }
}

fn residual(lhs: &ScaledValue, rhs: &ScaledValue) -> f64 {
    let den = lhs.abs().add(&rhs.abs()).add(&ScaledValue::ONE);
    (lhs.sub(rhs) / den).to_f64().abs()
}

pub fn integral_identity_residual(
    q: &Potential,
    q_tilde: &Potential,
    z: f64,
) -> Result<IdentityResiduals> {
    let w = weyl_functions(q, z)?;
    let wt = weyl_functions(q_tilde, z)?;
    let (xs, ws) = gauss_legendre_on(NODES, 0.0, 1.0);
    let a = left_solutions_on_grid(q, z, &xs)?;
    let at = left_solutions_on_grid(q_tilde, z, &xs)?;

    let mut i_direct = LogSum::new();
    let mut i_swapped = LogSum::new();
    let mut i_cal = LogSum::new();
    for k in 0..xs.len() {
        let gap = ws[k] * (q.eval(xs[k]) - q_tilde.eval(xs[k]));
        let (c0, s0) = a[k];
        let (ct, st) = at[k];
        i_direct.push(c0 * st * gap);
        i_swapped.push(ct * s0 * (-gap));
        i_cal.push(s0 * st * gap);
    }

    let dd = w.delta * wt.delta;
    let one = ScaledValue::ONE;
    // ΔΔ̃MN − Δ̃/Δ − MÑΔΔ̃ + 1
    let direct = (dd * (w.m * w.n))
        .sub(&(wt.delta / w.delta))
        .sub(&(dd * (w.m * wt.n)))
        .add(&one);
    let swapped = (dd * (wt.m * wt.n))
        .sub(&(w.delta / wt.delta))
        .sub(&(dd * (wt.m * w.n)))
        .add(&one);
    let calderon = dd * (wt.n - w.n);
    Ok(IdentityResiduals {
        direct: residual(&direct, &i_direct.value()),
        swapped: residual(&swapped, &i_swapped.value()),
        calderon: residual(&calderon, &i_cal.value()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_potentials() {
        let q = Potential::from_fn(|x| 1.0 + x, 16).unwrap();
        assert!(integral_identity_residual(&q, &q, 5.0).unwrap().max() < 1e-12);
    }

    #[test]
    fn constant_against_free() {
        let r =
            integral_identity_residual(&Potential::constant(1.0), &Potential::constant(0.0), 4.0)
                .unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
    }
}
