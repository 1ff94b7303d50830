//! Precise representatives, `L_p`-point classification and refined gradients.
//!
//! `f*(x)` is the limit of ball averages of `f` at `x`. On a lattice the limit
//! becomes a geometric radius schedule: the averages `a_j` over `B(x, r_j)`
//! are extrapolated to `r -> 0`, and `x` is an `L_p`-point when the mean
//! `p`-th power deviation from that value dies out along the schedule.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::grid::{multi_indices_up_to, weighted_mean, BallIntegrand, Field, GridFunction};
use crate::linalg::{fit_line, solve};

/// Radii `r_j = r0 * ratio^j`, `j = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSchedule {
    /// Largest radius.
    pub r0: f64,
    /// Shrink factor in `(0, 1)`.
    pub ratio: f64,
    /// Number of radii, at least 4.
    pub count: usize,
}

impl RadiusSchedule {
    /// Checked constructor.
    pub fn new(r0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(domain!("radius schedule needs r0 > 0, got {r0}"));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(domain!("radius schedule needs ratio in (0, 1), got {ratio}"));
        }
        if count < 4 {
            return Err(domain!("radius schedule needs at least 4 radii, got {count}"));
        }
        Ok(Self { r0, ratio, count })
    }

    /// The radii, largest first.
    pub fn radii(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.r0 * self.ratio.powi(j as i32)).collect()
    }

    /// The last (smallest) radius.
    pub fn smallest(&self) -> f64 {
        self.r0 * self.ratio.powi(self.count as i32 - 1)
    }

    /// Errors unless the smallest radius spans at least 3 lattice spacings.
    pub fn check_resolvable(&self, spacing: f64) -> Result<()> {
        if self.smallest() < 3.0 * spacing * (1.0 - 1e-9) {
            return Err(Error::Resolution(alloc::format!(
                "smallest radius {:e} is below 3 grid spacings ({:e})",
                self.smallest(),
                3.0 * spacing
            )));
        }
        Ok(())
    }
}

/// Thresholds of the representative estimator and the point classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentativeOptions {
    /// `|a_m - a_{m-1}| < rep_tol (1 + |a_m|)` declares the averages converged.
    pub rep_tol: f64,
    /// Final deviation below this classifies an `L_p`-point.
    pub lp_tol: f64,
    /// Deviations at or above this on the last 3 radii classify a non-`L_p`-point.
    pub not_tol: f64,
}

impl Default for RepresentativeOptions {
    fn default() -> Self {
        Self { rep_tol: 1e-3, lp_tol: 1e-3, not_tol: 1e-1 }
    }
}

/// Estimated precise representative at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Representative {
    /// Extrapolated limit of the ball averages, or zero when not converged.
    pub estimate: Vec<f64>,
    /// Whether the averages settled.
    pub converged: bool,
    /// Radii of the schedule.
    pub radii: Vec<f64>,
    /// Raw ball averages, one vector per radius.
    pub averages: Vec<Vec<f64>>,
}

/// Limit of `values[j]` as `radii[j] -> 0`, fitting
/// `a_j = a_inf + c r_j^beta` on the last four samples. The rate `beta` comes
/// from a log-log fit of successive differences; the fit is discarded (and the
/// last value returned) when the differences are rounding noise, change sign,
/// give an implausible rate, or move the limit further than ten times the last
/// step.
pub fn extrapolate(radii: &[f64], values: &[f64]) -> f64 {
    let m = values.len();
    let last = values[m - 1];
    if m < 4 {
        return last;
    }
    let r = &radii[m - 4..];
    let a = &values[m - 4..];
    let diffs: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = diffs.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if scale <= 1e-13 * (1.0 + last.abs()) {
        return last;
    }
    let same_sign = diffs.iter().all(|d| *d > 0.0) || diffs.iter().all(|d| *d < 0.0);
    if !same_sign {
        return last;
    }
    let xs: Vec<f64> = r[..3].iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = diffs.iter().map(|d| d.abs().ln()).collect();
    let Some((beta, _)) = fit_line(&xs, &ys) else {
        return last;
    };
    if !(0.25..=6.0).contains(&beta) {
        return last;
    }
    // Least squares for (a_inf, c) with the rate fixed.
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (rj, aj) in r.iter().zip(a) {
        let q = rj.powf(beta);
        s11 += 1.0;
        s12 += q;
        s22 += q * q;
        b1 += aj;
        b2 += q * aj;
    }
    let Ok(sol) = solve(&[s11, s12, s12, s22], &[b1, b2]) else {
        return last;
    };
    let limit = sol[0];
    if !limit.is_finite() || (limit - last).abs() > 10.0 * diffs[2].abs() {
        return last;
    }
    limit
}

pub(crate) fn ball_weight_sets<F: Field + ?Sized>(
    field: &F,
    x: &[f64],
    radii: &[f64],
) -> Result<Vec<Vec<(usize, f64)>>> {
    radii.iter().map(|&r| field.grid().ball_weights(x, r)).collect()
}

fn representative_from_weights<F: Field + ?Sized>(
    field: &F,
    radii: &[f64],
    weights: &[Vec<(usize, f64)>],
    opts: &RepresentativeOptions,
) -> Representative {
    let averages: Vec<Vec<f64>> = weights
        .iter()
        .map(|w| weighted_mean(field, w, BallIntegrand::Raw))
        .collect();
    let m = averages.len();
    let comps = field.components();
    let last = &averages[m - 1];
    let prev = &averages[m - 2];
    let step = euclid(last.iter().zip(prev).map(|(a, b)| a - b));
    let size = euclid(last.iter().copied());
    let converged = step < opts.rep_tol * (1.0 + size);
    let estimate = if converged {
        (0..comps)
            .map(|c| {
                let seq: Vec<f64> = averages.iter().map(|a| a[c]).collect();
                extrapolate(radii, &seq)
            })
            .collect()
    } else {
        vec![0.0; comps]
    };
    Representative { estimate, converged, radii: radii.to_vec(), averages }
}

fn euclid(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}

fn check_point<F: Field + ?Sized>(field: &F, x: &[f64], sched: &RadiusSchedule) -> Result<()> {
    if x.len() != field.grid().dim() {
        return Err(domain!("point has dimension {}, grid has {}", x.len(), field.grid().dim()));
    }
    sched.check_resolvable(field.grid().max_spacing())
}

/// Precise representative of a scalar or vector field at `x`.
///
/// When the averages do not settle, the estimate is zero and `converged` is
/// false (the "otherwise" branch of the definition).
pub fn precise_rep<F: Field + ?Sized>(
    field: &F,
    x: &[f64],
    sched: &RadiusSchedule,
    opts: &RepresentativeOptions,
) -> Result<Representative> {
    check_point(field, x, sched)?;
    let radii = sched.radii();
    let weights = ball_weight_sets(field, x, &radii)?;
    Ok(representative_from_weights(field, &radii, &weights, opts))
}

/// Mean of `|v - center|^p` over `B(x, r)`.
pub fn lp_deviation<F: Field + ?Sized>(
    field: &F,
    x: &[f64],
    r: f64,
    p: f64,
    center: &[f64],
) -> Result<f64> {
    Ok(crate::grid::ball_average(field, x, r, BallIntegrand::AbsDev { center, p })?[0])
}

/// Verdict of the `L_p`-point test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointVerdict {
    /// Deviation at the smallest radius below `lp_tol`.
    LpPoint,
    /// Deviation at least `not_tol` on the last three radii.
    NotLpPoint,
    /// Neither.
    Inconclusive,
}

impl PointVerdict {
    /// Stable name used in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            PointVerdict::LpPoint => "LpPoint",
            PointVerdict::NotLpPoint => "NotLpPoint",
            PointVerdict::Inconclusive => "Inconclusive",
        }
    }
}

impl fmt::Display for PointVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of [`classify_lp_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointClassification {
    /// Verdict.
    pub verdict: PointVerdict,
    /// Representative estimate used as the centre of the deviations.
    pub estimate: Vec<f64>,
    /// Whether the representative estimate converged.
    pub converged: bool,
    /// Radii of the schedule.
    pub radii: Vec<f64>,
    /// Raw ball averages per radius.
    pub averages: Vec<Vec<f64>>,
    /// `d_j`: mean `p`-th power deviation from the estimate over `B(x, r_j)`.
    pub deviations: Vec<f64>,
    /// Fitted slope of `log d_j` against `log r_j` (`+inf` if all vanish).
    pub slope: f64,
}

fn classify_from_weights<F: Field + ?Sized>(
    field: &F,
    p: f64,
    radii: &[f64],
    weights: &[Vec<(usize, f64)>],
    opts: &RepresentativeOptions,
) -> PointClassification {
    let rep = representative_from_weights(field, radii, weights, opts);
    let deviations: Vec<f64> = weights
        .iter()
        .map(|w| weighted_mean(field, w, BallIntegrand::AbsDev { center: &rep.estimate, p })[0])
        .collect();
    let m = deviations.len();
    let verdict = if deviations[m - 1] < opts.lp_tol {
        PointVerdict::LpPoint
    } else if deviations[m - 3..].iter().all(|d| *d >= opts.not_tol) {
        PointVerdict::NotLpPoint
    } else {
        PointVerdict::Inconclusive
    };
    let slope = if deviations.iter().all(|d| *d <= 1e-300) {
        f64::INFINITY
    } else {
        let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = deviations.iter().map(|d| d.max(1e-300).ln()).collect();
        fit_line(&xs, &ys).map(|(s, _)| s).unwrap_or(0.0)
    };
    PointClassification {
        verdict,
        estimate: rep.estimate,
        converged: rep.converged,
        radii: radii.to_vec(),
        averages: rep.averages,
        deviations,
        slope,
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(domain!("exponent p must be a finite real >= 1, got {p}"));
    }
    Ok(())
}

/// Classifies `x` as an `L_p`-point of the field (or not).
pub fn classify_lp_point<F: Field + ?Sized>(
    field: &F,
    x: &[f64],
    p: f64,
    sched: &RadiusSchedule,
    opts: &RepresentativeOptions,
) -> Result<PointClassification> {
    check_exponent(p)?;
    check_point(field, x, sched)?;
    let radii = sched.radii();
    let weights = ball_weight_sets(field, x, &radii)?;
    Ok(classify_from_weights(field, p, &radii, &weights, opts))
}

/// One row of a refined-gradient table.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedGradientRow {
    /// Sample point.
    pub point: Vec<f64>,
    /// For order 1: classification of the full gradient vector with the
    /// Euclidean deviation `|grad f(z) - (grad f)*(x)|`.
    pub gradient: Option<PointClassification>,
    /// Per multi-index classification of the scalar fields `d^alpha f`.
    pub entries: Vec<(Vec<u32>, PointClassification)>,
    /// Point verdict: the gradient verdict for order 1, otherwise the
    /// aggregate over the per-multi-index entries.
    pub verdict: PointVerdict,
}

/// Refined-gradient classification over a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedGradientTable {
    /// Derivative order `k`.
    pub order: u32,
    /// Exponent.
    pub p: f64,
    /// Rows in input order.
    pub rows: Vec<RefinedGradientRow>,
}

impl RefinedGradientTable {
    /// Indices of rows whose verdict is not `LpPoint`, i.e. the enumerated
    /// exceptional points of the sample.
    pub fn exceptional(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.verdict != PointVerdict::LpPoint)
            .map(|(i, _)| i)
            .collect()
    }

    /// Fraction of sample points that fail the test.
    pub fn failing_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.exceptional().len() as f64 / self.rows.len() as f64
    }
}

fn aggregate(verdicts: impl Iterator<Item = PointVerdict>) -> PointVerdict {
    let mut all_lp = true;
    for v in verdicts {
        match v {
            PointVerdict::NotLpPoint => return PointVerdict::NotLpPoint,
            PointVerdict::Inconclusive => all_lp = false,
            PointVerdict::LpPoint => {}
        }
    }
    if all_lp {
        PointVerdict::LpPoint
    } else {
        PointVerdict::Inconclusive
    }
}

/// Classifies every `|alpha| = k` derivative of `f` (and every `|alpha| < k`
/// too when `include_lower`) at each point of `points`.
pub fn classify_refined_gradient(
    f: &GridFunction,
    p: f64,
    points: &[Vec<f64>],
    k: u32,
    include_lower: bool,
    sched: &RadiusSchedule,
    opts: &RepresentativeOptions,
) -> Result<RefinedGradientTable> {
    check_exponent(p)?;
    if k == 0 || k > 3 {
        return Err(domain!("refined-gradient order must be 1, 2 or 3, got {k}"));
    }
    let n = f.grid().dim();
    let alphas: Vec<Vec<u32>> = multi_indices_up_to(n, k)
        .into_iter()
        .filter(|a| {
            let order = a.iter().sum::<u32>();
            order == k || (include_lower && order >= 1)
        })
        .collect();
    let fields: Vec<GridFunction> = alphas.iter().map(|a| f.derivative(a)).collect();
    let gradient = if k == 1 { Some(f.gradient()) } else { None };
    let radii = sched.radii();
    let mut rows = Vec::with_capacity(points.len());
    for x in points {
        check_point(f, x, sched)?;
        let weights = ball_weight_sets(f, x, &radii)?;
        let entries: Vec<(Vec<u32>, PointClassification)> = alphas
            .iter()
            .zip(&fields)
            .map(|(a, fld)| (a.clone(), classify_from_weights(fld, p, &radii, &weights, opts)))
            .collect();
        let grad_class = gradient
            .as_ref()
            .map(|g| classify_from_weights(g, p, &radii, &weights, opts));
        let verdict = match &grad_class {
            Some(c) => c.verdict,
            None => aggregate(entries.iter().map(|e| e.1.verdict)),
        };
        rows.push(RefinedGradientRow { point: x.clone(), gradient: grad_class, entries, verdict });
    }
    Ok(RefinedGradientTable { order: k, p, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::grid::{gradient_fd, Grid, VectorField};
    use alloc::sync::Arc;

    fn sign(v: f64) -> f64 {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(RadiusSchedule::new(0.1, 0.5, 3).is_err());
        assert!(RadiusSchedule::new(0.1, 1.0, 4).is_err());
        let s = RadiusSchedule::new(0.08, 0.5, 4).unwrap();
        assert!((s.smallest() - 0.01).abs() < 1e-15);
        assert!(s.check_resolvable(0.004).is_err());
        assert!(s.check_resolvable(0.003).is_ok());
    }

    #[test]
    fn extrapolation_recovers_power_law_limit() {
        let radii: Vec<f64> = (0..6).map(|j| 0.1 * 0.5f64.powi(j)).collect();
        for beta in [1.0, 2.0, 0.5] {
            let vals: Vec<f64> = radii.iter().map(|r| 3.0 + 0.7 * r.powf(beta)).collect();
            assert!((extrapolate(&radii, &vals) - 3.0).abs() < 1e-10, "beta={beta}");
        }
        let flat = vec![2.5; 6];
        assert_eq!(extrapolate(&radii, &flat), 2.5);
        let zigzag = [1.0, 1.1, 0.9, 1.05, 0.97, 1.01];
        assert_eq!(extrapolate(&radii, &zigzag), 1.01);
    }

    #[test]
    fn continuous_function_representative_is_its_value() {
        let x = [0.3, -0.2];
        let g = Arc::new(Grid::centered(&x, 0.05, 0.0005).unwrap());
        let f = corpus::sample("gauss", g).unwrap();
        let sched = RadiusSchedule::new(0.04, 0.5, 5).unwrap();
        let rep = precise_rep(&f, &x, &sched, &RepresentativeOptions::default()).unwrap();
        assert!(rep.converged);
        let exact = (-(0.09f64 + 0.04)).exp();
        assert!((rep.estimate[0] - exact).abs() < 1e-6, "{}", rep.estimate[0] - exact);
    }

    #[test]
    fn sign_function_at_origin() {
        let g = Arc::new(Grid::cube(1, -1.0, 1.0, 40001).unwrap());
        let f = GridFunction::from_fn(g, |y| sign(y[0])).unwrap();
        let sched = RadiusSchedule::new(0.4, 0.5, 4).unwrap();
        let opts = RepresentativeOptions::default();
        let rep = precise_rep(&f, &[0.0], &sched, &opts).unwrap();
        assert!(rep.converged);
        assert!(rep.estimate[0].abs() < 1e-12);
        for r in sched.radii() {
            for p in [1.0, 2.0] {
                let d = lp_deviation(&f, &[0.0], r, p, &[0.0]).unwrap();
                assert!((d - 1.0).abs() < 1e-3, "r={r} p={p} d={d}");
            }
        }
        let c = GridFunction::from_fn(f.grid_arc().clone(), |_| 0.25).unwrap();
        assert_eq!(lp_deviation(&c, &[0.1], 0.3, 1.0, &[0.25]).unwrap(), 0.0);
    }

    #[test]
    fn unit_direction_field_away_from_origin() {
        let x = [0.5, 0.0];
        let g = Arc::new(Grid::centered(&x, 0.02, 0.0002).unwrap());
        let field = VectorField::from_fn(g, 2, |y, out| {
            let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
            out[0] = y[0] / r;
            out[1] = y[1] / r;
        })
        .unwrap();
        let sched = RadiusSchedule::new(0.016, 0.5, 4).unwrap();
        let rep = precise_rep(&field, &x, &sched, &RepresentativeOptions::default()).unwrap();
        assert!(rep.converged);
        assert!((rep.estimate[0] - 1.0).abs() < 1e-2 && rep.estimate[1].abs() < 1e-2);
    }

    #[test]
    fn gradient_of_abs_1d_origin_is_not_an_lp_point() {
        let g = Arc::new(Grid::cube(1, -1.0, 1.0, 40001).unwrap());
        let f = corpus::sample("abs_1d", g).unwrap();
        let grad = gradient_fd(&f);
        let sched = RadiusSchedule::new(0.4, 0.5, 4).unwrap();
        let c = classify_lp_point(&grad, &[0.0], 1.0, &sched, &RepresentativeOptions::default()).unwrap();
        assert_eq!(c.verdict, PointVerdict::NotLpPoint);
        assert!(c.estimate[0].abs() < 1e-12);
        assert!(c.deviations.iter().all(|d| (d - 1.0).abs() < 1e-3));
    }

    #[test]
    fn gradient_of_abs_2d_off_origin_is_an_lp_point() {
        let x = [0.3, 0.4];
        let g = Arc::new(Grid::centered(&x, 0.0021, 6.25e-5).unwrap());
        let f = corpus::sample("abs_nd", g).unwrap();
        let grad = gradient_fd(&f);
        let sched = RadiusSchedule::new(0.002, 0.5, 4).unwrap();
        let c = classify_lp_point(&grad, &x, 1.0, &sched, &RepresentativeOptions::default()).unwrap();
        assert_eq!(c.verdict, PointVerdict::LpPoint, "{:?}", c.deviations);
        assert!((c.estimate[0] - 0.6).abs() < 1e-2 && (c.estimate[1] - 0.8).abs() < 1e-2);
    }

    #[test]
    fn refined_gradient_table_flags_only_the_origin_in_1d() {
        let g = Arc::new(Grid::cube(1, -1.0, 1.0, 40001).unwrap());
        let f = corpus::sample("abs_1d", g).unwrap();
        let sched = RadiusSchedule::new(0.2, 0.5, 4).unwrap();
        let pts = vec![vec![-0.5], vec![0.0], vec![0.5]];
        let t = classify_refined_gradient(&f, 2.0, &pts, 1, false, &sched, &RepresentativeOptions::default())
            .unwrap();
        assert_eq!(t.exceptional(), vec![1]);
        assert!((t.failing_fraction() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn refined_gradient_of_gaussian_at_order_two() {
        let x = [0.2, -0.1];
        let g = Arc::new(Grid::centered(&x, 0.03, 0.0005).unwrap());
        let f = corpus::sample("gauss", g).unwrap();
        let sched = RadiusSchedule::new(0.016, 0.5, 4).unwrap();
        let t = classify_refined_gradient(&f, 2.0, &[x.to_vec()], 2, true, &sched, &RepresentativeOptions::default())
            .unwrap();
        assert_eq!(t.rows[0].verdict, PointVerdict::LpPoint);
        assert_eq!(t.rows[0].entries.len(), 5);
    }

    #[test]
    fn unresolvable_schedule_is_rejected() {
        let g = Arc::new(Grid::cube(1, -1.0, 1.0, 21).unwrap());
        let f = corpus::sample("abs_1d", g).unwrap();
        let sched = RadiusSchedule::new(0.2, 0.5, 4).unwrap();
        assert!(matches!(
            precise_rep(&f, &[0.0], &sched, &RepresentativeOptions::default()),
            Err(Error::Resolution(_))
        ));
    }
}
