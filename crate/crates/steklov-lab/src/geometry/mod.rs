//! Conformal factors, the potentials they induce, admissibility classes and
//! the x ↦ 1 − x involution.

mod forms;
mod series;

pub use forms::FactorForm;
pub use series::ChebSeries;

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_DEGREE: usize = 64;
pub const GRID_POINTS: usize = 1024;
const RESOLUTION_LIMIT: f64 = 1e-8;
const SERIES_CHOP: f64 = 1e-14;

/// Positive factor f on [0, 1] held as a Chebyshev series, optionally backed
/// by an exact evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalFactor {
    pub series: ChebSeries,
    pub form: Option<FactorForm>,
    #[serde(skip)]
    d1: Option<ChebSeries>,
    #[serde(skip)]
    d2: Option<ChebSeries>,
}

impl ConformalFactor {
    pub fn from_form(form: FactorForm, degree: usize) -> Result<Self> {
        let series = ChebSeries::from_fn(|x| form.value(x), degree);
        Self::build(series, Some(form))
    }

    pub fn from_series(series: ChebSeries) -> Result<Self> {
        Self::build(series, None)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::from_form(FactorForm::Constant { value: c }, DEFAULT_DEGREE)
    }

    fn build(series: ChebSeries, form: Option<FactorForm>) -> Result<Self> {
        let d1 = series.derivative();
        let d2 = d1.derivative();
        let f = ConformalFactor {
            series,
            form,
            d1: Some(d1),
            d2: Some(d2),
        };
        let min = f.min_on_grid();
        if !(min > 0.0) {
            return Err(LabError::Domain(format!(
                "conformal factor must be positive, grid minimum is {min:e}"
            )));
        }
        Ok(f)
    }

    pub fn degree(&self) -> usize {
        self.series.degree()
    }

    pub fn closed_form_tag(&self) -> Option<String> {
        self.form.as_ref().map(|f| f.tag())
    }

    /// (f, f', f'') at x; exact when a closed form is attached.
    pub fn jet(&self, x: f64) -> [f64; 3] {
        match &self.form {
            Some(form) => form.jet(x),
            None => {
                let d1 = self.d1.clone().unwrap_or_else(|| self.series.derivative());
                let d2 = self.d2.clone().unwrap_or_else(|| d1.derivative());
                [self.series.eval(x), d1.eval(x), d2.eval(x)]
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.form {
            Some(form) => form.value(x),
            None => self.series.eval(x),
        }
    }

    pub fn min_on_grid(&self) -> f64 {
        (0..=GRID_POINTS)
            .map(|k| self.eval(k as f64 / GRID_POINTS as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest relative deviation between series and closed form on the grid.
    pub fn series_mismatch(&self) -> Option<f64> {
        let form = self.form.as_ref()?;
        Some(
            (0..=GRID_POINTS)
                .map(|k| {
                    let x = k as f64 / GRID_POINTS as f64;
                    let v = form.value(x);
                    (self.series.eval(x) - v).abs() / v.abs().max(f64::MIN_POSITIVE)
                })
                .fold(0.0, f64::max),
        )
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = 1.0 + self.sup_norm(0);
        (0..=GRID_POINTS / 2).all(|k| {
            let x = k as f64 / GRID_POINTS as f64;
            (self.eval(x) - self.eval(1.0 - x)).abs() <= tol * scale
        })
    }

    /// Sup over the grid of |f^{(k)}| for k ≤ 2.
    pub fn sup_norm(&self, k: usize) -> f64 {
        (0..=GRID_POINTS)
            .map(|i| self.jet(i as f64 / GRID_POINTS as f64)[k].abs())
            .fold(0.0, f64::max)
    }
}

impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        self.series == other.series
            && self.omega == other.omega
            && self.dim_n == other.dim_n
            && self.source == other.source
    }
}

/// Potential q on [0, 1] of the radial Schrödinger problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Potential {
    pub series: ChebSeries,
    pub omega: f64,
    /// Sphere dimension n when the potential comes from a factor.
    pub dim_n: Option<u32>,
    pub symmetric: bool,
    /// Exact evaluation goes through the factor's jet when present.
    pub source: Option<ConformalFactor>,
    /// False when the series tail exceeds the resolution limit and only the
    /// exact evaluator is trustworthy.
    pub series_resolved: bool,
}

impl Potential {
    /// Potential given directly by a function, resolved as a Chebyshev series.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, degree: usize) -> Result<Self> {
        let series = ChebSeries::from_fn(&f, degree);
        let tail = series.tail_ratio();
        if tail > RESOLUTION_LIMIT && series.sup_on_grid(64) > 1e-300 {
            return Err(LabError::Resolution {
                tail_ratio: tail,
                limit: RESOLUTION_LIMIT,
                degree,
            });
        }
        Ok(Self::assemble(series, 0.0, None, None, true))
    }

    pub fn constant(c: f64) -> Self {
        Self::assemble(
            ChebSeries::constant(c, DEFAULT_DEGREE),
            0.0,
            None,
            None,
            true,
        )
    }

    fn assemble(
        series: ChebSeries,
        omega: f64,
        dim_n: Option<u32>,
        source: Option<ConformalFactor>,
        series_resolved: bool,
    ) -> Self {
        let series = series.chopped(SERIES_CHOP);
        let mut q = Potential {
            series,
            omega,
            dim_n,
            symmetric: false,
            source,
            series_resolved,
        };
        q.symmetric = q.symmetry_defect() <= 1e-10 * (1.0 + q.sup_norm());
        q
    }

    pub fn eval(&self, x: f64) -> f64 {
        match (&self.source, self.dim_n) {
            (Some(f), Some(n)) => q_from_jet(f.jet(x), n, self.omega),
            _ => self.series.eval(x),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        (0..=GRID_POINTS)
            .map(|k| self.eval(k as f64 / GRID_POINTS as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn symmetry_defect(&self) -> f64 {
        (0..=GRID_POINTS / 2)
            .map(|k| {
                let x = k as f64 / GRID_POINTS as f64;
                (self.eval(x) - self.eval(1.0 - x)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// k-th derivative at x from the series (exact coefficient map).
    pub fn derivative_at(&self, k: usize, x: f64) -> f64 {
        self.series.nth_derivative(k).eval(x)
    }

    /// q ∘ η.
    pub fn reflect(&self) -> Potential {
        Potential {
            series: self.series.reflect(),
            omega: self.omega,
            dim_n: self.dim_n,
            symmetric: self.symmetric,
            source: self.source.as_ref().map(apply_involution),
            series_resolved: self.series_resolved,
        }
    }

    pub fn tag(&self) -> String {
        match &self.source {
            Some(f) => format!(
                "factor:{}",
                f.closed_form_tag().unwrap_or_else(|| "series".into())
            ),
            None => "direct".into(),
        }
    }
}

fn q_from_jet(j: [f64; 3], n: u32, omega: f64) -> f64 {
    let [f, f1, f2] = j;
    let p = (n as f64 - 2.0) / 4.0;
    let r = f1 / f;
    p * f2 / f + (p * p - p) * r * r - omega * f
}

/// q_f = (f^p)''/f^p − ω f with p = (n − 2)/4.
pub fn potential_from_factor(f: &ConformalFactor, n: u32, omega: f64) -> Result<Potential> {
    if n < 2 {
        return Err(LabError::Domain(format!(
            "dimension n = {n} must be at least 2"
        )));
    }
    let min = f.min_on_grid();
    if !(min > 0.0) {
        return Err(LabError::Domain(format!(
            "factor not positive (grid minimum {min:e})"
        )));
    }
    let degree = f.degree();
    let series = ChebSeries::from_fn(|x| q_from_jet(f.jet(x), n, omega), degree);
    let tail = series.tail_ratio();
    let resolved = tail <= RESOLUTION_LIMIT;
    if !resolved && f.form.is_none() {
        return Err(LabError::Resolution {
            tail_ratio: tail,
            limit: RESOLUTION_LIMIT,
            degree,
        });
    }
    Ok(Potential::assemble(
        series,
        omega,
        Some(n),
        Some(f.clone()),
        resolved,
    ))
}

/// f ∘ η with η(x) = 1 − x.
pub fn apply_involution(f: &ConformalFactor) -> ConformalFactor {
    let series = f.series.reflect();
    let d1 = series.derivative();
    let d2 = d1.derivative();
    ConformalFactor {
        series,
        form: f.form.as_ref().map(|g| g.reflected()),
        d1: Some(d1),
        d2: Some(d2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub in_cb: bool,
    pub in_db: bool,
    pub in_ca: bool,
    /// First k with q^{(k)}(0) ≠ (−1)^k q^{(k)}(1), searched up to `k_max`.
    pub db_first_k: Option<usize>,
    pub k_max: usize,
    /// max |f'(e)/f(e)| over the endpoints.
    pub endpoint_log_derivative: f64,
    /// ‖f‖∞, ‖f'‖∞, ‖f''‖∞, ‖1/f‖∞.
    pub norms: [f64; 4],
}

pub fn class_membership(
    f: &ConformalFactor,
    n: u32,
    omega: f64,
    a: f64,
    k_max: usize,
) -> Result<ClassReport> {
    let k_max = k_max.max(1);
    let j0 = f.jet(0.0);
    let j1 = f.jet(1.0);
    let endpoint_log_derivative = (j0[1] / j0[0]).abs().max((j1[1] / j1[0]).abs());
    let in_cb = n == 2 || endpoint_log_derivative <= 1.0 / (n as f64 - 2.0) * (1.0 + 1e-12);

    let q = potential_from_factor(f, n, omega)?;
    let db_first_k = first_endpoint_mismatch(&q, k_max, 1e-8);

    let norms = [
        f.sup_norm(0),
        f.sup_norm(1),
        f.sup_norm(2),
        1.0 / f.min_on_grid(),
    ];
    let in_ca = norms.iter().all(|&v| v <= a);
    Ok(ClassReport {
        in_cb,
        in_db: db_first_k.is_some(),
        in_ca,
        db_first_k,
        k_max,
        endpoint_log_derivative,
        norms,
    })
}

/// Least k ≤ k_max with q^{(k)}(0) ≠ (−1)^k q^{(k)}(1) at relative tolerance `tol`.
pub fn first_endpoint_mismatch(q: &Potential, k_max: usize, tol: f64) -> Option<usize> {
    let mut d = q.series.clone();
    let base = 1.0 + q.sup_norm();
    for k in 0..=k_max {
        let a = d.eval(0.0);
        let b = d.eval(1.0);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let scale = base.max(a.abs()).max(b.abs());
        if (a - sign * b).abs() > tol * scale {
            return Some(k);
        }
        d = d.derivative();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factor(form: FactorForm) -> ConformalFactor {
        ConformalFactor::from_form(form, DEFAULT_DEGREE).unwrap()
    }

    #[test]
    fn trivial_potentials() {
        let q = potential_from_factor(&ConformalFactor::constant(1.0).unwrap(), 3, 0.0).unwrap();
        assert_eq!(q.sup_norm(), 0.0);
        let q = potential_from_factor(&ConformalFactor::constant(2.0).unwrap(), 2, 1.0).unwrap();
        assert_eq!(q.eval(0.3), -2.0);
        assert!(q.symmetric);
    }

    #[test]
    fn rejects_non_positive_factor() {
        let r = ConformalFactor::from_form(FactorForm::Affine { a: -0.5, b: 1.0 }, 16);
        assert!(matches!(r, Err(LabError::Domain(_))));
    }

    #[test]
    fn series_matches_closed_form() {
        let f = factor(FactorForm::GaussianBump {
            base: 1.0,
            amp: 0.3,
            center: 0.4,
            width: 0.15,
        });
        assert!(f.series_mismatch().unwrap() < 1e-12);
    }

    #[test]
    fn involution_examples() {
        let f = factor(FactorForm::Exponential {
            scale: 1.0,
            rate: 1.0,
        });
        let g = apply_involution(&f);
        assert!((g.eval(0.25) - 0.75f64.exp()).abs() < 1e-14);
        assert_eq!(apply_involution(&g).series, f.series);
    }

    #[test]
    fn class_examples() {
        let one = ConformalFactor::constant(1.0).unwrap();
        let r = class_membership(&one, 3, 0.0, 2.0, 8).unwrap();
        assert!(r.in_cb && r.in_ca && !r.in_db);
        // |f'(0)/f(0)| = 1 sits exactly on the n = 3 bound; n = 4 excludes it
        let aff = factor(FactorForm::Affine { a: 1.0, b: 1.0 });
        assert!(class_membership(&aff, 3, 0.0, 10.0, 8).unwrap().in_cb);
        let r = class_membership(&aff, 4, 0.0, 10.0, 8).unwrap();
        assert!(!r.in_cb);
        assert_eq!(r.endpoint_log_derivative, 1.0);
        // f = e^x, n = 3 gives q = 1/16 − ω e^x: constant when ω = 0
        let e = factor(FactorForm::Exponential {
            scale: 1.0,
            rate: 1.0,
        });
        let r = class_membership(&e, 3, 0.0, 10.0, 8).unwrap();
        assert_eq!(r.db_first_k, None);
        let r = class_membership(&e, 3, 1.0, 10.0, 8).unwrap();
        assert_eq!(r.db_first_k, Some(0));
    }

    #[test]
    fn compact_bump_keeps_exact_evaluator() {
        let f = factor(FactorForm::Sum {
            terms: vec![
                FactorForm::Constant { value: 1.0 },
                FactorForm::CompactBump {
                    amp: 0.2,
                    center: 0.2,
                    radius: 0.15,
                },
            ],
        });
        let q = potential_from_factor(&f, 3, 0.0).unwrap();
        assert!(!q.series_resolved);
        let exact = q_from_jet(f.jet(0.25), 3, 0.0);
        assert_eq!(q.eval(0.25), exact);
    }
}
