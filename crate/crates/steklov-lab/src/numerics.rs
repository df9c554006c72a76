//! Small numerical building blocks shared by the modules: quadrature rules,
//! interpolation on uniform grids, root bracketing and least-squares lines.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton on the three-term recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| v * half).collect(),
    )
}

/// Composite Newton–Cotes weights for `intervals` equal panels of width `h`:
/// Simpson when the count is even, Simpson plus a closing 3/8 block when odd,
/// trapezoid for a single panel.
pub fn composite_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    match intervals {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let simpson_end = if intervals.is_multiple_of(2) {
                intervals
            } else {
                intervals - 3
            };
            let mut k = 0;
            while k < simpson_end {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
                k += 2;
            }
            if simpson_end < intervals {
                let s = simpson_end;
                w[s] += 3.0 * h / 8.0;
                w[s + 1] += 9.0 * h / 8.0;
                w[s + 2] += 9.0 * h / 8.0;
                w[s + 3] += 3.0 * h / 8.0;
            }
        }
    }
    w
}

/// Integral of uniformly sampled values with [`composite_weights`].
pub fn integrate_uniform(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let w = composite_weights(values.len() - 1, h);
    values.iter().zip(&w).map(|(v, w)| v * w).sum()
}

/// Four-point Lagrange interpolation of samples on the uniform grid `x_k = x0 + k h`.
pub fn interp_uniform(values: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    if n < 4 {
        let s = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        let t = s - k as f64;
        return values[k] * (1.0 - t) + values[k + 1] * t;
    }
    let s = (x - x0) / h;
    let k = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for i in 0..4 {
        let mut l = 1.0;
        for j in 0..4 {
            if i != j {
                l *= (s - (k + j) as f64) / (i as f64 - j as f64);
            }
        }
        acc += l * values[k + i];
    }
    acc
}

/// Bisection for a sign change of `f` on [a, b]; returns `None` when the
/// endpoint values share a sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol {
            return Some(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Golden-section search for a maximum of a unimodal `f` on [a, b].
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Ordinary least-squares line; returns (slope, intercept, r²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    (slope, intercept, r2)
}

/// Uniform grid of `n + 1` points on [a, b].
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

/// ln(sinh(x)) for x > 0 without overflow.
pub fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// ln(cosh(x)) without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_on(8, 0.0, 1.0);
        for p in 0..16 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn composite_weights_exact_for_cubics() {
        for n in 1..12 {
            let h = 1.0 / n as f64;
            let vals: Vec<f64> = (0..=n).map(|k| (k as f64 * h).powi(3)).collect();
            let s = integrate_uniform(&vals, h);
            let tol = if n == 1 { 0.3 } else { 1e-14 };
            assert!((s - 0.25).abs() < tol, "n={n} s={s}");
        }
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let h = 0.1;
        let vals: Vec<f64> = (0..11)
            .map(|k| (k as f64 * h).powi(3) - 2.0 * k as f64 * h)
            .collect();
        for &x in &[0.03, 0.47, 0.99, 1.0] {
            let exact = x * x * x - 2.0 * x;
            assert!((interp_uniform(&vals, 0.0, h, x) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn log_hyperbolics() {
        for &x in &[0.1, 1.0, 19.0, 25.0, 800.0] {
            if x < 700.0 {
                assert!((ln_sinh(x) - x.sinh().ln()).abs() < 1e-13 * x.max(1.0));
                assert!((ln_cosh(x) - x.cosh().ln()).abs() < 1e-13 * x.max(1.0));
            } else {
                assert!((ln_sinh(x) - (x - std::f64::consts::LN_2)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let (s, i, r2) = linear_fit(&xs, &ys);
        assert!((s - 3.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-13 && (r2 - 1.0).abs() < 1e-14);
    }
}
