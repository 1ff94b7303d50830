//! Tiny dense solvers for the regression and extrapolation fits.

use alloc::vec::Vec;

use crate::error::{numeric, Result};

/// Solves the square system `a x = b` (row-major `a`, `n x n`) by Gaussian
/// elimination with partial pivoting. Pivots below `1e-14` times the largest
/// entry count as singular.
pub fn solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(numeric!("singular {n}x{n} system (all-zero matrix)"));
    }
    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs <= 1e-14 * scale {
            return Err(numeric!("singular {n}x{n} system (pivot {piv_abs:e})"));
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Ok(x)
}

/// Least-squares line `y = intercept + slope * x`. Returns `(slope, intercept)`.
/// Needs at least two distinct abscissae.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
