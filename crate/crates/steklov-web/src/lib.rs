//! Browser bindings. Each export returns a JSON string; the plain `*_json`
//! functions carry the logic so they can be tested natively.

use serde_json::{json, Value};
use steklov_lab::{compare, dnmap, muntz, ConformalFactor, FactorForm};
use wasm_bindgen::prelude::*;

const DEGREE: usize = 48;
const M_MAX_CAP: u32 = 200;

/// f(x) = a0 + c1 cos πx + s1 sin πx + c2 cos 2πx.
fn factor(coeffs: &[f64]) -> Result<ConformalFactor, String> {
    let get = |i: usize| coeffs.get(i).copied().unwrap_or(0.0);
    let form = FactorForm::Fourier { a0: get(0), cos: vec![get(1), get(3)], sin: vec![get(2)] };
    ConformalFactor::from_form(form, DEGREE).map_err(|e| e.to_string())
}

fn check(n: u32, m_max: u32) -> Result<(), String> {
    if n < 2 {
        return Err(format!("n = {n} must be at least 2"));
    }
    if m_max > M_MAX_CAP {
        return Err(format!("m_max = {m_max} is above the demo cap of {M_MAX_CAP}"));
    }
    Ok(())
}

pub fn spectrum_json(coeffs: &[f64], n: u32, omega: f64, m_max: u32) -> Result<String, String> {
    check(n, m_max)?;
    let f = factor(coeffs)?;
    let s = dnmap::steklov_spectrum(&f, n, omega, m_max).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = s
        .rows
        .iter()
        .map(|r| json!({ "m": r.m, "kappa": r.kappa, "multiplicity": r.multiplicity.to_string(), "minus": r.lambda_minus, "plus": r.lambda_plus }))
        .collect();
    Ok(json!({ "rows": rows, "f0": f.eval(0.0), "f1": f.eval(1.0) }).to_string())
}

pub fn compare_json(coeffs: &[f64], coeffs_tilde: &[f64], n: u32, m_max: u32) -> Result<String, String> {
    check(n, m_max)?;
    let f = factor(coeffs)?;
    let g = factor(coeffs_tilde)?;
    let s = dnmap::steklov_spectrum(&f, n, 0.0, m_max).map_err(|e| e.to_string())?;
    let t = dnmap::steklov_spectrum(&g, n, 0.0, m_max).map_err(|e| e.to_string())?;
    let eps = compare::measure_epsilon(&s, &t);
    let gaps: Vec<Value> = s
        .rows
        .iter()
        .zip(&t.rows)
        .map(|(a, b)| json!({ "m": a.m, "minus": (a.lambda_minus - b.lambda_minus).abs(), "plus": (a.lambda_plus - b.lambda_plus).abs() }))
        .collect();
    let c = dnmap::calderon_norm_difference(&f, &g, n, 0.0, m_max).map_err(|e| e.to_string())?;
    Ok(json!({
        "eps": eps,
        "gaps": gaps,
        "calderon": { "norm": c.norm, "diverging": c.diverging, "slope": c.slope, "endpoint_gaps": c.endpoint_gaps },
    })
    .to_string())
}

pub fn muntz_json(n: u32, m0: u32, m_max: u32) -> Result<String, String> {
    check(n, m_max)?;
    let sys = muntz::muntz_sequence(n, m0, m_max).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = muntz::muntz_table(&sys)
        .into_iter()
        .map(|(k, l, gap, eps2, row)| json!({ "k": k, "lambda": l, "gap": gap, "eps2": eps2, "row_log_sum": row }))
        .collect();
    Ok(json!({ "alpha": sys.alpha, "rows": rows }).to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Steklov eigenvalue pairs (λ⁻, λ⁺) per sphere mode.
#[wasm_bindgen]
pub fn spectrum(coeffs: Vec<f64>, n: u32, omega: f64, m_max: u32) -> Result<String, JsError> {
    js(spectrum_json(&coeffs, n, omega, m_max))
}

/// Spectral closeness and Calderón block norms for two factors.
#[wasm_bindgen]
pub fn compare_factors(coeffs: Vec<f64>, coeffs_tilde: Vec<f64>, n: u32, m_max: u32) -> Result<String, JsError> {
    js(compare_json(&coeffs, &coeffs_tilde, n, m_max))
}

/// Müntz exponents, Blaschke index and coefficient row sums.
#[wasm_bindgen]
pub fn muntz_table(n: u32, m0: u32, m_max: u32) -> Result<String, JsError> {
    js(muntz_json(n, m0, m_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_spectrum() {
        let v: Value = serde_json::from_str(&spectrum_json(&[1.0], 3, 0.0, 4).unwrap()).unwrap();
        let row = &v["rows"][2];
        let y = 6f64.sqrt();
        assert!((row["minus"].as_f64().unwrap() - y * (y / 2.0).tanh()).abs() < 1e-8);
        assert_eq!(row["multiplicity"], "5");
    }

    #[test]
    fn compare_detects_endpoint_gap() {
        let v: Value = serde_json::from_str(&compare_json(&[1.0], &[4.0], 3, 30).unwrap()).unwrap();
        assert_eq!(v["calderon"]["diverging"], true);
        assert!((v["calderon"]["slope"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn muntz_rows_and_limits() {
        let v: Value = serde_json::from_str(&muntz_json(3, 0, 10).unwrap()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 11);
        assert!(spectrum_json(&[1.0], 3, 0.0, 10_000).is_err());
        assert!(spectrum_json(&[-1.0], 3, 0.0, 4).is_err());
    }
}
