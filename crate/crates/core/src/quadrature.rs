//! One-dimensional quadrature: adaptive Simpson for smooth integrands on an
//! interval and the trapezoid rule for smooth periodic integrands.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`. The interval is first cut into `panels` equal pieces so that narrow
/// peaks are not missed by the coarsest rule.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, panels: usize) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let hi = if k + 1 == panels { b } else { a + h * (k + 1) as f64 };
        let fa = f(lo);
        let fb = f(hi);
        let m = 0.5 * (lo + hi);
        let fm = f(m);
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(&f, lo, hi, fa, fm, fb, whole, tol / panels as f64, MAX_DEPTH)?;
    }
    if !total.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure(format!(
            "recursion limit reached on [{a}, {b}] (error estimate {:e})",
            delta.abs() / 15.0
        )));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Integral over one period `[0, 2 pi)` of a smooth periodic function. The
/// number of nodes is doubled until two successive estimates agree to
/// `rel_tol`.
pub fn periodic_trapezoid<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> Result<f64> {
    let tau = std::f64::consts::TAU;
    let mut n = 16usize;
    let mut sum: f64 = (0..n).map(|k| f(tau * k as f64 / n as f64)).sum();
    let mut estimate = sum * tau / n as f64;
    while n < 1 << 20 {
        // Odd nodes of the refined grid.
        let extra: f64 = (0..n)
            .map(|k| f(tau * (2 * k + 1) as f64 / (2 * n) as f64))
            .sum();
        sum += extra;
        n *= 2;
        let refined = sum * tau / n as f64;
        if (refined - estimate).abs() <= rel_tol * refined.abs() {
            return Ok(refined);
        }
        estimate = refined;
    }
    Err(Error::QuadratureFailure(
        "periodic trapezoid rule did not converge".into(),
    ))
}
