//! Oracles shared by the integration tests.

#![allow(dead_code)]

/// Adaptive Simpson quadrature with Richardson correction.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Cumulative integrals of `f` from 0 to each (increasing) grid point.
pub fn cumulative_integrals(f: &dyn Fn(f64) -> f64, grid: &[f64], tol: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut prev = 0.0;
    grid.iter()
        .map(|&t| {
            // Split each panel so the early peak is always resolved.
            let mut x = prev;
            let pieces = 16;
            let h = (t - prev) / pieces as f64;
            for _ in 0..pieces {
                acc += integrate(f, x, x + h, tol / pieces as f64);
                x += h;
            }
            prev = t;
            acc
        })
        .collect()
}

pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

/// Binomial standard error of a fraction estimated from `n` trials.
pub fn binomial_se(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}
