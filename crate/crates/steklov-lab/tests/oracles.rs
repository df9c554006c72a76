//! Independent oracles: plain fixed-step integrators, finite differences,
//! brute-force counting and closed forms, checked against the library.

use steklov_lab::dnmap::{kappa, multiplicity};
use steklov_lab::muntz::{gram_coefficients, MuntzSystem};
use steklov_lab::ode::{fundamental_solutions, weyl_functions};
use steklov_lab::transform::solve_kernel;
use steklov_lab::Potential;

fn cos_pi() -> Potential {
    Potential::from_fn(|x| (std::f64::consts::PI * x).cos(), 64).unwrap()
}

/// Classical RK4 for u'' = (q + z)u on [0, 1]; returns (u(1), u'(1)).
fn rk4(q: &Potential, z: f64, u0: f64, v0: f64, steps: usize) -> (f64, f64) {
    let h = 1.0 / steps as f64;
    let rhs = |x: f64, u: f64| (q.eval(x) + z) * u;
    let (mut u, mut v) = (u0, v0);
    for i in 0..steps {
        let x = i as f64 * h;
        let (k1u, k1v) = (v, rhs(x, u));
        let (k2u, k2v) = (v + 0.5 * h * k1v, rhs(x + 0.5 * h, u + 0.5 * h * k1u));
        let (k3u, k3v) = (v + 0.5 * h * k2v, rhs(x + 0.5 * h, u + 0.5 * h * k2u));
        let (k4u, k4v) = (v + h * k3v, rhs(x + h, u + h * k3u));
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    (u, v)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (a.abs().max(b.abs()).max(1e-300))
}

#[test]
fn weyl_data_against_rk4() {
    let qs = [
        Potential::constant(0.0),
        Potential::constant(2.5),
        cos_pi(),
        Potential::from_fn(|x| 1.0 + x * x, 64).unwrap(),
    ];
    for q in &qs {
        for z in [0.5, 4.0, 30.0, 150.0] {
            let (s, sp) = rk4(q, z, 0.0, 1.0, 4000);
            let (c, _) = rk4(q, z, 1.0, 0.0, 4000);
            let w = weyl_functions(q, z).unwrap();
            assert!(
                close(w.delta.to_f64(), s, 1e-9),
                "Δ at z = {z}: {} vs {s}",
                w.delta.to_f64()
            );
            assert!(close(w.n, -sp / s, 1e-9), "N at z = {z}");
            assert!(close(w.m, -c / s, 1e-9), "M at z = {z}");
        }
    }
}

#[test]
fn flat_weyl_functions_closed_form() {
    for t in [0.3f64, 2.0, 9.0, 40.0] {
        let w = weyl_functions(&Potential::constant(0.0), t * t).unwrap();
        let coth = 1.0 / t.tanh();
        assert!(close(w.m, -t * coth, 1e-9));
        assert!(close(w.n, -t * coth, 1e-9));
        assert!(close(w.delta.to_f64(), t.sinh() / t, 1e-9));
    }
}

/// Number of eigenvalues below `lam` of the tridiagonal Dirichlet matrix (Sturm count).
fn sturm_count(diag: &[f64], off: f64, lam: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, a) in diag.iter().enumerate() {
        d = a - lam - if i == 0 { 0.0 } else { off * off / d };
        if d == 0.0 {
            d = 1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th Dirichlet eigenvalue of −u'' + qu by second-order differences and bisection.
fn fd_eigenvalue(q: &Potential, cells: usize, k: usize) -> f64 {
    let h = 1.0 / cells as f64;
    let diag: Vec<f64> = (1..cells)
        .map(|i| 2.0 / (h * h) + q.eval(i as f64 * h))
        .collect();
    let off = -1.0 / (h * h);
    let (mut lo, mut hi) = (-100.0, 4.0 / (h * h) + 100.0);
    while hi - lo > 1e-12 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if sturm_count(&diag, off, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Zero of Δ(z) = s₀(1; z) on a bracket, from the library solver.
fn delta_root(q: &Potential, mut a: f64, mut b: f64) -> f64 {
    let d = |z: f64| fundamental_solutions(q, z).unwrap().s0_1.signum();
    let da = d(a);
    assert_ne!(da, d(b));
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if d(m) == da {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn dirichlet_eigenvalues_by_finite_differences() {
    for q in [cos_pi(), Potential::from_fn(|x| 3.0 * x - 1.0, 64).unwrap()] {
        for k in 1..=3usize {
            // Richardson on two grids removes the h² term
            let coarse = fd_eigenvalue(&q, 1000, k);
            let fine = fd_eigenvalue(&q, 2000, k);
            let fd = (4.0 * fine - coarse) / 3.0;
            let guess = (k as f64 * std::f64::consts::PI).powi(2);
            let root = -delta_root(&q, -guess - 8.0, -guess + 8.0);
            assert!(
                close(root, fd, 1e-6),
                "k = {k}: solver {root}, differences {fd}"
            );
        }
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Monomials of degree d in n variables, counted by enumeration.
fn monomials(n: u32, d: u32) -> u128 {
    fn go(vars: u32, left: u32) -> u128 {
        if vars == 1 {
            return 1;
        }
        (0..=left).map(|k| go(vars - 1, left - k)).sum()
    }
    go(n, d)
}

#[test]
fn multiplicity_by_counting_harmonics() {
    for n in 2..=6u32 {
        for m in 0..=12u32 {
            let below = if m >= 2 { monomials(n, m - 2) } else { 0 };
            assert_eq!(
                multiplicity(n, m),
                monomials(n, m) - below,
                "n = {n}, m = {m}"
            );
            assert_eq!(
                monomials(n, m),
                binomial((m + n - 1) as u64, (n - 1) as u64)
            );
            assert_eq!(kappa(n, m), (m * (m + n - 2)) as f64);
        }
    }
}

/// Modified Bessel I₁(s)/s by its power series.
fn i1_over_s(s: f64) -> f64 {
    let x = 0.25 * s * s;
    let mut term = 0.5;
    let mut sum = term;
    for j in 1..60 {
        term *= x / (j as f64 * (j + 1) as f64);
        sum += term;
    }
    sum
}

#[test]
fn constant_potential_kernel_closed_form() {
    let c = 3.0;
    let n = 128;
    let kg = solve_kernel(&Potential::constant(c), n, 1e-13).unwrap();
    let mut worst = 0.0f64;
    for k in (0..=n).step_by(8) {
        let x = k as f64 / n as f64;
        for l in -(k as isize)..=(k as isize) {
            let t = l as f64 / n as f64;
            let exact = 0.5 * c * (x + t) * i1_over_s((c * (x * x - t * t)).sqrt());
            worst = worst.max((kg.k(k, l) - exact).abs());
        }
    }
    assert!(worst < 1e-5, "worst {worst:.2e}");
}

/// Orthonormal basis of span{x^λ_j} on [0, 1] by Cholesky of the exact Gram matrix.
fn cholesky_basis(lambdas: &[f64]) -> Vec<Vec<f64>> {
    let p = lambdas.len();
    let g: Vec<Vec<f64>> = lambdas
        .iter()
        .map(|a| lambdas.iter().map(|b| 1.0 / (a + b + 1.0)).collect())
        .collect();
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j {
                (g[i][i] - s).sqrt()
            } else {
                (g[i][j] - s) / l[j][j]
            };
        }
    }
    // rows of L⁻¹ are the coefficients of the orthonormal functions
    let mut inv = vec![vec![0.0; p]; p];
    for i in 0..p {
        inv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let s: f64 = (j..i).map(|k| l[i][k] * inv[k][j]).sum();
            inv[i][j] = -s / l[i][i];
        }
    }
    inv
}

#[test]
fn muntz_legendre_against_gram_cholesky() {
    let lambdas = vec![0.0, 2.0, 4.5, 7.0, 9.25, 12.0];
    let sys = MuntzSystem::from_lambdas(lambdas.clone(), 0.0).unwrap();
    let c = gram_coefficients(&sys, lambdas.len() - 1).unwrap();
    let basis = cholesky_basis(&lambdas);
    for (p, row) in basis.iter().enumerate() {
        for x in [0.05f64, 0.3, 0.71, 1.0] {
            let oracle: f64 = row.iter().zip(&lambdas).map(|(a, l)| a * x.powf(*l)).sum();
            let got = c.eval(p, x);
            assert!(
                (got.abs() - oracle.abs()).abs() < 1e-8 * (1.0 + oracle.abs()),
                "p = {p}, x = {x}: {got} vs {oracle}"
            );
        }
    }
}
