//! One-dimensional composite quadrature.

use crate::error::{numeric, Result};

/// Composite Simpson rule on `[a, b]` with `nodes` points (`nodes` odd, >= 3).
pub fn simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, nodes: usize) -> f64 {
    assert!(nodes >= 3 && nodes % 2 == 1, "Simpson needs an odd node count >= 3");
    let intervals = nodes - 1;
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Composite Simpson with interval doubling until two successive estimates
/// agree to `tol` (absolute, relative to `max(1, |I|)`).
pub fn simpson_converged(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut nodes = 17;
    let mut prev = simpson(&f, a, b, nodes);
    for _ in 0..16 {
        nodes = 2 * nodes - 1;
        let cur = simpson(&f, a, b, nodes);
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(numeric!("composite Simpson did not reach tolerance {tol:e} with {nodes} nodes"))
}
