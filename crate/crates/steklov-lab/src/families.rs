//! Seeded test families: random admissible factors and the bump
//! perturbations used by the stability drivers.

use crate::error::Result;
use crate::geometry::{ConformalFactor, FactorForm, DEFAULT_DEGREE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random smooth factor `1 + Σ_{k≤3} (a_k cos kπx + b_k sin kπx)` with |a_k|, |b_k| ≤ amp/k².
pub fn random_factor_form(rng: &mut impl Rng, amp: f64) -> FactorForm {
    let mut cos = Vec::with_capacity(3);
    let mut sin = Vec::with_capacity(3);
    for k in 1..=3 {
        let s = amp / (k * k) as f64;
        cos.push(rng.random_range(-s..=s));
        sin.push(rng.random_range(-s..=s));
    }
    FactorForm::Fourier { a0: 1.0, cos, sin }
}

/// `count` random factors from one seed; amp 0.15 keeps f within [0.5, 1.5].
pub fn random_factors(seed: u64, count: usize) -> Result<Vec<ConformalFactor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| ConformalFactor::from_form(random_factor_form(&mut rng, 0.15), DEFAULT_DEGREE))
        .collect()
}

/// δ sin⁴(πx): symmetric about ½, vanishing to third order at both ends.
pub fn symmetric_bump(delta: f64) -> FactorForm {
    FactorForm::Fourier {
        a0: 0.375 * delta,
        cos: vec![0.0, -0.5 * delta, 0.0, 0.125 * delta],
        sin: vec![],
    }
}

/// δ sin⁴(πx) cos(πx): antisymmetric about ½, endpoint values and derivatives pinned.
pub fn pinned_asymmetric_bump(delta: f64) -> FactorForm {
    FactorForm::Fourier {
        a0: 0.0,
        cos: vec![0.125 * delta, 0.0, -0.1875 * delta, 0.0, 0.0625 * delta],
        sin: vec![],
    }
}

/// Symmetric base factor 1.1 − 0.1 cos(2πx) used by the default families.
pub fn symmetric_base() -> FactorForm {
    FactorForm::Fourier {
        a0: 1.1,
        cos: vec![0.0, -0.1],
        sin: vec![],
    }
}

/// `base + perturbation` as a factor.
pub fn perturbed(base: &FactorForm, perturbation: FactorForm) -> Result<ConformalFactor> {
    ConformalFactor::from_form(
        FactorForm::Sum {
            terms: vec![base.clone(), perturbation],
        },
        DEFAULT_DEGREE,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_positive() {
        let a = random_factors(7, 5).unwrap();
        let b = random_factors(7, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|f| f.min_on_grid() > 0.5));
    }

    #[test]
    fn bump_shapes() {
        let s = symmetric_bump(2.0);
        let a = pinned_asymmetric_bump(1.0);
        for &x in &[0.0, 0.2, 0.5, 0.9, 1.0] {
            let sx = (std::f64::consts::PI * x).sin();
            let cx = (std::f64::consts::PI * x).cos();
            assert!((s.value(x) - 2.0 * sx.powi(4)).abs() < 1e-14);
            assert!((a.value(x) - sx.powi(4) * cx).abs() < 1e-14);
        }
        for e in [0.0, 1.0] {
            let j = s.jet(e);
            let k = a.jet(e);
            assert!(j.iter().chain(k.iter()).all(|v| v.abs() < 1e-12));
        }
    }
}
