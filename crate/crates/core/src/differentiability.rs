//! Difference quotients `f_{x,t}`, their `W^1_p` distance to the formal
//! differential, `L_p`-approximate differentials by local regression, and the
//! density test for the sets `A_eps`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::convergence::{ConvergenceCriteria, ConvergenceReport, Verdict};
use crate::error::{domain, numeric, Error, Result};
use crate::grid::{gradient_fd, lp_norm, Field, Grid, GridFunction, Region};
use crate::linalg::solve;
use crate::representative::{precise_rep, RadiusSchedule, RepresentativeOptions};

/// Linear map `z -> a . z` attached to a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct FormalDifferential {
    x: Vec<f64>,
    a: Vec<f64>,
}

impl FormalDifferential {
    /// `a` is the precise representative of `gradient` at `x`; fails with a
    /// precondition error when the averages do not settle.
    pub fn from_representative<F: Field + ?Sized>(
        gradient: &F,
        x: &[f64],
        sched: &RadiusSchedule,
        opts: &RepresentativeOptions,
    ) -> Result<Self> {
        if gradient.components() != x.len() {
            return Err(domain!("gradient field has {} components for a point in R^{}", gradient.components(), x.len()));
        }
        let rep = precise_rep(gradient, x, sched, opts)?;
        if !rep.converged {
            return Err(Error::Precondition(alloc::format!(
                "gradient averages at {x:?} do not settle; the formal differential is undefined"
            )));
        }
        Ok(Self { x: x.to_vec(), a: rep.estimate })
    }

    /// Differential of `f` at `x` from its finite-difference gradient.
    pub fn of_function(
        f: &GridFunction,
        x: &[f64],
        sched: &RadiusSchedule,
        opts: &RepresentativeOptions,
    ) -> Result<Self> {
        Self::from_representative(&gradient_fd(f), x, sched, opts)
    }

    /// The fitted map of a converged `L_p`-approximate differential.
    pub fn from_approx_differential(fit: &ApproxDifferential) -> Result<Self> {
        if fit.report.verdict != Verdict::ConvergesToZero {
            return Err(Error::Precondition(alloc::format!(
                "regression residuals at {:?} end as {}",
                fit.x,
                fit.report.verdict
            )));
        }
        Ok(Self { x: fit.x.clone(), a: fit.a_fit.clone() })
    }

    /// Base point.
    pub fn point(&self) -> &[f64] {
        &self.x
    }
    /// Coefficient vector `a`.
    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }
    /// `a . z`.
    pub fn apply(&self, z: &[f64]) -> f64 {
        self.a.iter().zip(z).map(|(a, v)| a * v).sum()
    }
}

/// Fixed lattice over the bounding box of `U`, grown by a few cells so that
/// nested stencils stay centred on `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLattice {
    region: Region,
    grid: Arc<Grid>,
}

/// Cells of padding around `U`; enough for third-order stencils.
pub const REFERENCE_MARGIN: usize = 3;

impl ReferenceLattice {
    /// `nodes` nodes per axis across `U`'s bounding box, plus the margin.
    pub fn new(region: &Region, nodes: usize) -> Result<Self> {
        let Some((lo, hi)) = region.bounding_box() else {
            return Err(domain!("reference lattices need a ball or a box"));
        };
        if nodes < 3 {
            return Err(domain!("reference lattice needs at least 3 nodes per axis"));
        }
        let n = lo.len();
        let m = REFERENCE_MARGIN as f64;
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for d in 0..n {
            if !(hi[d] > lo[d]) {
                return Err(domain!("U is degenerate along axis {d}"));
            }
            let h = (hi[d] - lo[d]) / (nodes - 1) as f64;
            lower[d] = lo[d] - m * h;
            upper[d] = hi[d] + m * h;
        }
        let grid = Grid::new(&lower, &upper, &vec![nodes + 2 * REFERENCE_MARGIN; n])?;
        Ok(Self { region: region.clone(), grid: Arc::new(grid) })
    }

    /// The region `U`.
    pub fn region(&self) -> &Region {
        &self.region
    }
    /// The lattice.
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Diameter of `U`.
    fn diameter(&self) -> f64 {
        self.region.diameter().expect("geometric region")
    }
}

/// Checks that `x + s * (reference box)` fits in the source lattice and that
/// `s` resolves at least two source spacings across `U`.
pub(crate) fn check_scaled_box(src: &Grid, x: &[f64], s: f64, lattice: &ReferenceLattice, what: &str) -> Result<()> {
    if x.len() != src.dim() || lattice.grid.dim() != src.dim() {
        return Err(domain!("dimension mismatch between point, source lattice and U"));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(domain!("{what} must be positive, got {s}"));
    }
    if s * lattice.diameter() < 2.0 * src.max_spacing() {
        return Err(domain!(
            "{what} = {s:e} is below two source spacings across U ({:e})",
            2.0 * src.max_spacing() / lattice.diameter()
        ));
    }
    let g = &lattice.grid;
    let lo: Vec<f64> = (0..x.len()).map(|d| x[d] + s * g.lower()[d]).collect();
    let hi: Vec<f64> = (0..x.len()).map(|d| x[d] + s * g.upper()[d]).collect();
    if !src.contains_box(&lo, &hi) {
        return Err(domain!("x + {what} U leaves the source lattice ({what} = {s})"));
    }
    Ok(())
}

/// `z -> (f*(x + t z) - f*(x)) / t` on the reference lattice, with `f*` the
/// cubic interpolant of the samples.
pub fn difference_quotient(f: &GridFunction, x: &[f64], t: f64, lattice: &ReferenceLattice) -> Result<GridFunction> {
    let src = f.grid();
    check_scaled_box(src, x, t, lattice, "t")?;
    let fx = f.interpolate(x)?;
    let mut y = vec![0.0; x.len()];
    let mut values = Vec::with_capacity(lattice.grid.len());
    for i in 0..lattice.grid.len() {
        lattice.grid.node_coords(i, &mut y);
        for d in 0..x.len() {
            y[d] = x[d] + t * y[d];
        }
        values.push((f.interpolate(&y)? - fx) / t);
    }
    GridFunction::new(lattice.grid.clone(), values)
}

/// The two halves of the `W^1_p(U)` error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W1pError {
    /// `||f_{x,t} - L||_{L_p(U)}`.
    pub value_part: f64,
    /// `sum_i ||d_i (f_{x,t} - L)||_{L_p(U)}`.
    pub gradient_part: f64,
    /// Sum of both parts.
    pub total: f64,
}

/// Splits `wkp_norm(g, 1, p, U)` into value and gradient parts.
pub(crate) fn w1p_parts(g: &GridFunction, p: f64, region: &Region) -> Result<W1pError> {
    if !region.inset_by(g.grid(), 1)? {
        return Err(domain!("U reaches the edge of its reference lattice"));
    }
    let value_part = lp_norm(g, p, region)?;
    let mut gradient_part = 0.0;
    for d in 0..g.grid().dim() {
        gradient_part += lp_norm(&g.partial(d), p, region)?;
    }
    Ok(W1pError { value_part, gradient_part, total: value_part + gradient_part })
}

/// `W^1_p(U)` distance between `f_{x,t}` and the formal differential `L`.
pub fn diffquot_w1p_error(
    f: &GridFunction,
    l: &FormalDifferential,
    t: f64,
    p: f64,
    lattice: &ReferenceLattice,
) -> Result<W1pError> {
    let q = difference_quotient(f, l.point(), t, lattice)?;
    let mut z = vec![0.0; l.point().len()];
    let grid = lattice.grid.clone();
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            grid.node_coords(i, &mut z);
            q.values()[i] - l.apply(&z)
        })
        .collect();
    let diff = GridFunction::new(grid, values)?;
    w1p_parts(&diff, p, &lattice.region)
}

/// Result of [`diffquot_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiffQuotStudy {
    /// Differential the quotients are compared with.
    pub differential: FormalDifferential,
    /// Error split per `t`.
    pub parts: Vec<W1pError>,
    /// `(t, total error)` with fitted slope and verdict.
    pub report: ConvergenceReport,
}

/// Maps [`diffquot_w1p_error`] over a decreasing `t`-schedule.
pub fn diffquot_study(
    f: &GridFunction,
    l: &FormalDifferential,
    p: f64,
    lattice: &ReferenceLattice,
    ts: &[f64],
    criteria: &ConvergenceCriteria,
) -> Result<DiffQuotStudy> {
    let parts = ts.iter().map(|&t| diffquot_w1p_error(f, l, t, p, lattice)).collect::<Result<Vec<_>>>()?;
    let errors = parts.iter().map(|e| e.total).collect();
    let report = ConvergenceReport::new(ts.to_vec(), errors, criteria)?;
    Ok(DiffQuotStudy { differential: l.clone(), parts, report })
}

/// Settings of the local regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionOptions {
    /// Starting slope for the reweighting iteration (`None`: least squares).
    pub init: Option<Vec<f64>>,
    /// Reweighting sweeps cap.
    pub max_sweeps: usize,
    /// Stop when the slope moves less than this (relative).
    pub tol: f64,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        Self { init: None, max_sweeps: 500, tol: 1e-12 }
    }
}

/// Regression fits along a radius schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxDifferential {
    /// Base point.
    pub x: Vec<f64>,
    /// `f*(x)`.
    pub value: f64,
    /// Fitted slope per radius.
    pub fits: Vec<Vec<f64>>,
    /// Slope at the smallest radius.
    pub a_fit: Vec<f64>,
    /// `(r, mean |f - f*(x) - a.(y - x)|^p / r^p)` with fitted slope and verdict.
    pub report: ConvergenceReport,
    /// Precise representative of the gradient, when it settles.
    pub gradient_rep: Option<Vec<f64>>,
    /// On convergence: whether `|a_fit - (grad f)*(x)| < 5e-2`.
    pub matches_gradient: Option<bool>,
}

/// Tolerance of the regression / averaging identity check.
pub const IDENTITY_TOL: f64 = 5e-2;

/// Weighted mean of `|res|^p` for slope `a`.
fn objective(rows: &[(f64, Vec<f64>, f64)], a: &[f64], p: f64) -> f64 {
    let total: f64 = rows.iter().map(|r| r.0).sum();
    rows.iter().map(|(w, dy, b)| w * residual(dy, b, a).abs().powf(p)).sum::<f64>() / total
}

fn residual(dy: &[f64], b: &f64, a: &[f64]) -> f64 {
    b - dy.iter().zip(a).map(|(u, v)| u * v).sum::<f64>()
}

/// Weighted least squares `min sum w (b - a.dy)^2`.
fn weighted_lsq(rows: &[(f64, Vec<f64>, f64)], extra: &[f64]) -> Result<Vec<f64>> {
    let n = rows[0].1.len();
    let mut m = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for ((w, dy, b), e) in rows.iter().zip(extra) {
        let w = w * e;
        for i in 0..n {
            rhs[i] += w * dy[i] * b;
            for j in 0..n {
                m[i * n + j] += w * dy[i] * dy[j];
            }
        }
    }
    solve(&m, &rhs).map_err(|_| numeric!("degenerate ball sampling in the local regression"))
}

/// Minimizes `sum w |b - a.dy|^p` over `a`: normal equations for `p = 2`,
/// otherwise iteratively reweighted least squares with step halving so that
/// the objective never increases. Residuals are floored when reweighting; the
/// floor starts at `1e-2 scale` and shrinks tenfold whenever the iteration
/// stalls, down to `1e-12 scale`. A fixed tiny floor leaves the reweighted
/// system too ill-conditioned to make progress from a distant start.
fn fit_slope(rows: &[(f64, Vec<f64>, f64)], p: f64, scale: f64, opts: &RegressionOptions) -> Result<Vec<f64>> {
    let ones = vec![1.0; rows.len()];
    let lsq = weighted_lsq(rows, &ones)?;
    // Flat data: a = 0 fits exactly, and 0^(p-2) weights would overflow.
    if p == 2.0 || scale == 0.0 {
        return Ok(lsq);
    }
    let mut a = opts.init.clone().unwrap_or(lsq);
    let mut best = objective(rows, &a, p);
    let min_floor = 1e-12 * scale;
    let mut floor = 1e-2 * scale;
    for _ in 0..opts.max_sweeps {
        let reweight: Vec<f64> =
            rows.iter().map(|(_, dy, b)| residual(dy, b, &a).abs().max(floor).powf(p - 2.0)).collect();
        let target = weighted_lsq(rows, &reweight)?;
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-6 {
            let cand: Vec<f64> = a.iter().zip(&target).map(|(u, v)| u + step * (v - u)).collect();
            let val = objective(rows, &cand, p);
            if val <= best {
                let change = cand.iter().zip(&a).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                let size = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                a = cand;
                best = val;
                moved = change > opts.tol * (1.0 + size);
                break;
            }
            step *= 0.5;
        }
        if !moved {
            if floor <= min_floor {
                break;
            }
            floor = (0.1 * floor).max(min_floor);
        }
    }
    Ok(a)
}

/// `L_p`-approximate differential at `x`: for each radius, the slope that
/// minimizes `mean_{B(x,r)} |f - f*(x) - a.(y - x)|^p / r^p`.
pub fn lp_approx_differential(
    f: &GridFunction,
    x: &[f64],
    p: f64,
    sched: &RadiusSchedule,
    rep_opts: &RepresentativeOptions,
    reg_opts: &RegressionOptions,
    criteria: &ConvergenceCriteria,
) -> Result<ApproxDifferential> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(domain!("exponent p must be a finite real >= 1, got {p}"));
    }
    let rep = precise_rep(f, x, sched, rep_opts)?;
    if !rep.converged {
        return Err(Error::Precondition(alloc::format!("f has no settled representative at {x:?}")));
    }
    let fx = rep.estimate[0];
    let g = f.grid();
    let n = g.dim();
    let radii = sched.radii();
    let mut fits = Vec::with_capacity(radii.len());
    let mut residuals = Vec::with_capacity(radii.len());
    let mut y = vec![0.0; n];
    for &r in &radii {
        let weights = g.ball_weights(x, r)?;
        let rows: Vec<(f64, Vec<f64>, f64)> = weights
            .iter()
            .map(|&(i, w)| {
                g.node_coords(i, &mut y);
                let dy: Vec<f64> = (0..n).map(|d| y[d] - x[d]).collect();
                (w, dy, f.values()[i] - fx)
            })
            .collect();
        let scale = rows.iter().fold(0.0f64, |m, row| m.max(row.2.abs()));
        let a = fit_slope(&rows, p, scale, reg_opts)?;
        residuals.push(objective(&rows, &a, p) / r.powf(p));
        fits.push(a);
    }
    let a_fit = fits.last().expect("schedule has >= 4 radii").clone();
    let report = ConvergenceReport::new(radii, residuals, criteria)?;
    let grad = precise_rep(&gradient_fd(f), x, sched, rep_opts)?;
    let gradient_rep = grad.converged.then_some(grad.estimate);
    let matches_gradient = match (&gradient_rep, report.verdict) {
        (Some(gr), Verdict::ConvergesToZero) => {
            let dist = gr.iter().zip(&a_fit).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            Some(dist < IDENTITY_TOL)
        }
        _ => None,
    };
    Ok(ApproxDifferential { x: x.to_vec(), value: fx, fits, a_fit, report, gradient_rep, matches_gradient })
}

/// Per-radius densities of `A_eps = {y : D_x(y) > eps}` with
/// `D_x(y) = |f(y) - f*(x) - L(y - x)| / |y - x|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    /// Threshold.
    pub eps: f64,
    /// Radii.
    pub radii: Vec<f64>,
    /// Weighted fraction of `B(x, r)` in `A_eps`.
    pub densities: Vec<f64>,
    /// Chebyshev bounds `mean D_x^p / eps^p`.
    pub chebyshev_bounds: Vec<f64>,
    /// Whether every density is within 10% of its Chebyshev bound.
    pub chebyshev_ok: bool,
}

/// Relative slack of the Chebyshev cross-check.
pub const CHEBYSHEV_SLACK: f64 = 0.1;

/// Density of `A_eps` in shrinking balls around `x`, with the Chebyshev
/// bound at exponent `p` as a cross-check. The node at `x` itself is skipped.
pub fn density_test(
    f: &GridFunction,
    l: &FormalDifferential,
    eps: f64,
    p: f64,
    sched: &RadiusSchedule,
    rep_opts: &RepresentativeOptions,
) -> Result<DensityReport> {
    if !(eps > 0.0) || !(p >= 1.0) {
        return Err(domain!("density test needs eps > 0 and p >= 1"));
    }
    let x = l.point();
    let rep = precise_rep(f, x, sched, rep_opts)?;
    if !rep.converged {
        return Err(Error::Precondition(alloc::format!("f has no settled representative at {x:?}")));
    }
    let fx = rep.estimate[0];
    let g = f.grid();
    let n = g.dim();
    let radii = sched.radii();
    // A node this close to x is x up to rounding in its coordinates.
    let centre = 1e-9 * g.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut densities = Vec::with_capacity(radii.len());
    let mut bounds = Vec::with_capacity(radii.len());
    for &r in &radii {
        let weights = g.ball_weights(x, r)?;
        let (mut total, mut hit, mut moment) = (0.0, 0.0, 0.0);
        for &(i, w) in &weights {
            g.node_coords(i, &mut y);
            for d in 0..n {
                z[d] = y[d] - x[d];
            }
            let dist = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            total += w;
            if dist <= centre {
                continue;
            }
            let dx = (f.values()[i] - fx - l.apply(&z)).abs() / dist;
            if dx > eps {
                hit += w;
            }
            moment += w * dx.powf(p);
        }
        densities.push(hit / total);
        bounds.push(moment / total / eps.powf(p));
    }
    let chebyshev_ok = densities.iter().zip(&bounds).all(|(d, b)| *d <= (1.0 + CHEBYSHEV_SLACK) * b + 1e-12);
    Ok(DensityReport { eps, radii, densities, chebyshev_bounds: bounds, chebyshev_ok })
}
