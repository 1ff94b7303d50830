//! Multi-indices, Taylor polynomials built from precise representatives of
//! nested finite-difference derivatives, remainders (direct and integral
//! form) and the `W^k_p` remainder study.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::convergence::{ConvergenceCriteria, ConvergenceReport, Verdict};
use crate::differentiability::{check_scaled_box, ReferenceLattice};
use crate::error::{domain, Result};
use crate::grid::{multi_indices_up_to, wkp_norm, wkp_top_norm, Field, GridFunction};
use crate::quadrature::simpson;
use crate::representative::{precise_rep, RadiusSchedule, RepresentativeOptions};
use crate::special::factorial;

/// Largest supported Taylor order.
pub const MAX_ORDER: u32 = 3;

/// Nodes of the composite Simpson rule in `t`.
pub const INTEGRAL_NODES: usize = 65;

/// `alpha = (alpha_1, ..., alpha_n)` with nonnegative entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    /// `|alpha| = sum alpha_i`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `alpha! = prod alpha_i!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    /// `z^alpha = prod z_i^alpha_i` (with `0^0 = 1`).
    pub fn pow(&self, z: &[f64]) -> f64 {
        self.0.iter().zip(z).map(|(&a, v)| v.powi(a as i32)).product()
    }

    /// `(|alpha|, alpha!, z^alpha)`.
    pub fn eval(&self, z: &[f64]) -> (u32, f64, f64) {
        (self.order(), self.factorial(), self.pow(z))
    }

    /// Whether `self <= other` componentwise.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// All multi-indices in `n` variables with `|alpha| <= k`, by order.
    pub fn up_to(n: usize, k: u32) -> Vec<Self> {
        multi_indices_up_to(n, k).into_iter().map(MultiIndex).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// One Taylor coefficient `(d^alpha f)*(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorCoefficient {
    /// Multi-index.
    pub alpha: MultiIndex,
    /// Estimate (zero when not converged).
    pub value: f64,
    /// Whether the ball averages settled.
    pub converged: bool,
}

/// Coefficients of the order-`k` Taylor polynomial at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorData {
    /// Base point.
    pub x: Vec<f64>,
    /// Order.
    pub k: u32,
    /// One entry per `|alpha| <= k`, by order.
    pub coefficients: Vec<TaylorCoefficient>,
}

impl TaylorData {
    /// Coefficient for `alpha`, if present.
    pub fn coeff(&self, alpha: &MultiIndex) -> Option<&TaylorCoefficient> {
        self.coefficients.iter().find(|c| &c.alpha == alpha)
    }

    /// Whether every coefficient converged.
    pub fn all_converged(&self) -> bool {
        self.coefficients.iter().all(|c| c.converged)
    }

    /// `P(x + w) = sum c_alpha / alpha! w^alpha`.
    pub fn polynomial(&self, w: &[f64]) -> f64 {
        self.coefficients.iter().map(|c| c.value / c.alpha.factorial() * c.alpha.pow(w)).sum()
    }
}

/// Taylor coefficients of `f` at `x`.
///
/// `d^alpha f` comes from nested finite differences. Coefficients are taken
/// from the top order down: for each `alpha`, the precise representative is
/// computed for `d^alpha f` minus the Taylor terms already known from higher
/// orders, `sum_{beta > alpha} c_beta / (beta - alpha)! (y - x)^{beta - alpha}`.
/// The subtracted polynomial vanishes at `x`, so the limit is unchanged, and
/// polynomials of degree `<= k` come out exact up to rounding. Unsettled
/// coefficients are flagged rather than reported as errors.
pub fn taylor_data(
    f: &GridFunction,
    x: &[f64],
    k: u32,
    sched: &RadiusSchedule,
    opts: &RepresentativeOptions,
) -> Result<TaylorData> {
    if k > MAX_ORDER {
        return Err(domain!("Taylor order {k} exceeds the supported maximum {MAX_ORDER}"));
    }
    let g = f.grid();
    let n = g.dim();
    if x.len() != n {
        return Err(domain!("point has dimension {}, grid has {n}", x.len()));
    }
    let alphas = MultiIndex::up_to(n, k);
    let mut known: Vec<TaylorCoefficient> = Vec::with_capacity(alphas.len());
    let mut y = vec![0.0; n];
    let mut w = vec![0.0; n];
    for alpha in alphas.iter().rev() {
        let field = f.derivative(&alpha.0);
        let higher: Vec<(MultiIndex, f64)> = known
            .iter()
            .filter(|c| c.alpha != *alpha && alpha.le(&c.alpha))
            .map(|c| {
                let gamma = MultiIndex(c.alpha.0.iter().zip(&alpha.0).map(|(b, a)| b - a).collect());
                let scale = c.value / gamma.factorial();
                (gamma, scale)
            })
            .collect();
        let corrected = if higher.is_empty() {
            field
        } else {
            let values: Vec<f64> = (0..g.len())
                .map(|i| {
                    g.node_coords(i, &mut y);
                    for d in 0..n {
                        w[d] = y[d] - x[d];
                    }
                    field.values()[i] - higher.iter().map(|(gm, s)| s * gm.pow(&w)).sum::<f64>()
                })
                .collect();
            GridFunction::new(f.grid_arc().clone(), values)?
        };
        let rep = precise_rep(&corrected, x, sched, opts)?;
        known.push(TaylorCoefficient { alpha: alpha.clone(), value: rep.estimate[0], converged: rep.converged });
    }
    known.reverse();
    Ok(TaylorData { x: x.to_vec(), k, coefficients: known })
}

/// `R^k_{f,x,h}(z) = f*(x + h z) - P(x + h z)` on the reference lattice of `V`.
pub fn remainder(f: &GridFunction, td: &TaylorData, h: f64, lattice: &ReferenceLattice) -> Result<GridFunction> {
    check_scaled_box(f.grid(), &td.x, h, lattice, "h")?;
    let n = td.x.len();
    let grid = lattice.grid().clone();
    let mut z = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        grid.node_coords(i, &mut z);
        for d in 0..n {
            z[d] *= h;
            y[d] = td.x[d] + z[d];
        }
        values.push(f.interpolate(&y)? - td.polynomial(&z));
    }
    GridFunction::new(grid, values)
}

/// Integral form of the remainder with the top-order derivative fields
/// precomputed.
#[derive(Debug, Clone)]
pub struct IntegralRemainder {
    x: Vec<f64>,
    k: u32,
    fields: Vec<(MultiIndex, GridFunction, f64)>,
}

impl IntegralRemainder {
    /// Builds `d^alpha f` for every `|alpha| = k` (with `d^alpha f(x)` by
    /// interpolation). Needs `1 <= k <= 3`.
    pub fn new(f: &GridFunction, x: &[f64], k: u32) -> Result<Self> {
        if k == 0 || k > MAX_ORDER {
            return Err(domain!("integral remainder needs 1 <= k <= {MAX_ORDER}, got {k}"));
        }
        if x.len() != f.grid().dim() {
            return Err(domain!("point has dimension {}, grid has {}", x.len(), f.grid().dim()));
        }
        let fields = MultiIndex::up_to(x.len(), k)
            .into_iter()
            .filter(|a| a.order() == k)
            .map(|a| {
                let field = f.derivative(&a.0);
                let at_x = field.interpolate(x)?;
                Ok((a, field, at_x))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { x: x.to_vec(), k, fields })
    }

    /// `k h^k sum_{|alpha|=k} z^alpha/alpha! int_0^1 (1-t)^{k-1}
    /// (d^alpha f(x + t h z) - d^alpha f(x)) dt`.
    pub fn eval(&self, h: f64, z: &[f64]) -> Result<f64> {
        let n = self.x.len();
        if z.len() != n {
            return Err(domain!("z has dimension {}, expected {n}", z.len()));
        }
        let end: Vec<f64> = (0..n).map(|d| self.x[d] + h * z[d]).collect();
        let grid = self.fields[0].1.grid();
        if !grid.contains_point(&end) || !grid.contains_point(&self.x) {
            return Err(domain!("segment from {:?} to {end:?} leaves the lattice", self.x));
        }
        let k = self.k as i32;
        let mut total = 0.0;
        let mut y = vec![0.0; n];
        for (alpha, field, at_x) in &self.fields {
            let mut failed = None;
            let integral = simpson(
                |t| {
                    for d in 0..n {
                        y[d] = self.x[d] + t * h * z[d];
                    }
                    match field.interpolate(&y) {
                        Ok(v) => (1.0 - t).powi(k - 1) * (v - at_x),
                        Err(e) => {
                            failed = Some(e);
                            0.0
                        }
                    }
                },
                0.0,
                1.0,
                INTEGRAL_NODES,
            );
            if let Some(e) = failed {
                return Err(e);
            }
            total += alpha.pow(z) / alpha.factorial() * integral;
        }
        Ok(self.k as f64 * h.powi(k) * total)
    }
}

/// One-shot [`IntegralRemainder`] evaluation.
pub fn integral_remainder(f: &GridFunction, x: &[f64], k: u32, h: f64, z: &[f64]) -> Result<f64> {
    IntegralRemainder::new(f, x, k)?.eval(h, z)
}

/// Which `W^k_p` norm the remainder study measures with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemainderNorm {
    /// Sum over all `|alpha| <= k`.
    #[default]
    Full,
    /// `L_p` norm plus the `|alpha| = k` terms.
    TopOrder,
}

/// Result of [`remainder_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderStudy {
    /// Coefficients used.
    pub taylor: TaylorData,
    /// `(h, ||R / h^k||_{W^k_p(V)})` with slope and verdict. The verdict is
    /// `Inconclusive` whenever a coefficient did not converge.
    pub report: ConvergenceReport,
}

/// Relative rounding level of a remainder built from extrapolated ball averages.
const ROUNDING: f64 = 1e-12;

/// `||h^{-k} R^k_{f,x,h}||_{W^k_p(V)}` along a decreasing `h`-schedule.
///
/// Errors below the rounding floor `1e-12 max|f| / h^k` count as zero.
pub fn remainder_study(
    f: &GridFunction,
    td: &TaylorData,
    p: f64,
    lattice: &ReferenceLattice,
    hs: &[f64],
    norm: RemainderNorm,
    criteria: &ConvergenceCriteria,
) -> Result<RemainderStudy> {
    let k = td.k;
    let errors = hs
        .iter()
        .map(|&h| {
            let r = remainder(f, td, h, lattice)?.scale(1.0 / h.powi(k as i32))?;
            match norm {
                RemainderNorm::Full => wkp_norm(&r, k, p, lattice.region()),
                RemainderNorm::TopOrder => wkp_top_norm(&r, k, p, lattice.region()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    // Rounding in `R` sits near ROUNDING * max|f|; dividing by h^k lifts it.
    let fmax = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floors: Vec<f64> = hs.iter().map(|h| ROUNDING * fmax / h.powi(k as i32)).collect();
    let mut report = ConvergenceReport::with_floors(hs.to_vec(), errors, &floors, criteria)?;
    if !td.all_converged() {
        report.verdict = Verdict::Inconclusive;
    }
    Ok(RemainderStudy { taylor: td.clone(), report })
}

/// Lattice over the segment endpoints is the caller's; this only samples
/// `z` on the reference lattice nodes inside `V`.
pub fn sample_directions(lattice: &ReferenceLattice, stride: usize) -> Result<Vec<Vec<f64>>> {
    let grid: &Arc<_> = lattice.grid();
    let mask = lattice.region().node_mask(grid)?;
    Ok((0..grid.len()).filter(|&i| mask[i] && i % stride.max(1) == 0).map(|i| grid.node_point(i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use crate::convergence::geometric;
    use crate::corpus;
    use crate::grid::{Grid, Region};

    #[test]
    fn multiindex_examples() {
        assert_eq!(MultiIndex(vec![1, 2]).eval(&[3.0, 4.0]), (3, 2.0, 48.0));
        assert_eq!(MultiIndex(vec![0, 0, 0]).eval(&[3.0, 0.0, -1.0]), (0, 1.0, 1.0));
        assert_eq!(MultiIndex(vec![2, 0]).eval(&[3.0, 4.0]).2, 9.0);
        assert_eq!(MultiIndex(vec![2, 0, 1]).to_string(), "(2,0,1)");
        // C(n + k, k) coefficients.
        assert_eq!(MultiIndex::up_to(2, 2).len(), 6);
        assert_eq!(MultiIndex::up_to(3, 3).len(), 20);
    }

    fn patch(x: &[f64], half: f64, h: f64) -> Arc<Grid> {
        Arc::new(Grid::centered(x, half, h).unwrap())
    }

    #[test]
    fn exponential_coefficients() {
        let x = [0.0, 0.0];
        let f = corpus::sample("exp1", patch(&x, 0.05, 0.001)).unwrap();
        let sched = RadiusSchedule::new(0.024, 0.5, 4).unwrap();
        let td = taylor_data(&f, &x, 2, &sched, &RepresentativeOptions::default()).unwrap();
        assert!(td.all_converged());
        for c in &td.coefficients {
            let want = if c.alpha.0[1] == 0 { 1.0 } else { 0.0 };
            assert!((c.value - want).abs() < 1e-4, "{} -> {}", c.alpha, c.value);
        }
    }

    #[test]
    fn quadratic_polynomial_has_zero_remainder() {
        let x = [0.2, -0.1];
        let f = GridFunction::from_fn(patch(&x, 0.3, 0.01), |y| 1.0 + 2.0 * y[0] - y[1] + 0.5 * y[0] * y[0] - 3.0 * y[0] * y[1] + y[1] * y[1])
            .unwrap();
        let sched = RadiusSchedule::new(0.24, 0.5, 4).unwrap();
        let td = taylor_data(&f, &x, 2, &sched, &RepresentativeOptions::default()).unwrap();
        let lat = ReferenceLattice::new(&Region::ball(&[0.0, 0.0], 1.0).unwrap(), 21).unwrap();
        let r = remainder(&f, &td, 0.2, &lat).unwrap();
        assert!(r.values().iter().all(|v| v.abs() < 1e-10));
        let ir = IntegralRemainder::new(&f, &x, 2).unwrap();
        assert!(ir.eval(0.2, &[0.6, -0.3]).unwrap().abs() < 1e-9);
        let hs = geometric(0.2, 0.5, 4).unwrap();
        // Dividing by h^k lifts rounding above the default floor.
        let criteria = ConvergenceCriteria { zero_floor: 1e-8, ..ConvergenceCriteria::default() };
        let study = remainder_study(&f, &td, 2.0, &lat, &hs, RemainderNorm::Full, &criteria).unwrap();
        assert!(study.report.errors.iter().all(|e| *e <= 1e-9), "{:?}", study.report.errors);
        assert_eq!(study.report.verdict, Verdict::ConvergesToZero, "{:?}", study.report);
    }

    #[test]
    fn exponential_remainder_value() {
        let x = [0.0, 0.0];
        let f = corpus::sample("exp1", patch(&x, 0.2, 0.001)).unwrap();
        let sched = RadiusSchedule::new(0.024, 0.5, 4).unwrap();
        let td = taylor_data(&f, &x, 2, &sched, &RepresentativeOptions::default()).unwrap();
        // Direct evaluation of e^{0.1} - (1 + 0.1 + 0.005).
        let oracle = 0.1f64.exp() - 1.105;
        let direct = f.interpolate(&[0.1, 0.0]).unwrap() - td.polynomial(&[0.1, 0.0]);
        assert!((direct - oracle).abs() < 1e-6, "{direct} vs {oracle}");
        let integral = integral_remainder(&f, &x, 2, 1.0, &[0.1, 0.0]).unwrap();
        assert!((integral - oracle).abs() < 1e-6, "{integral} vs {oracle}");
    }

    #[test]
    fn linearization_remainder_of_squared_norm() {
        let f = GridFunction::from_fn(Arc::new(Grid::cube(2, -1.0, 1.0, 201).unwrap()), |y| y[0] * y[0] + y[1] * y[1])
            .unwrap();
        let z = [0.3, -0.4];
        let v = integral_remainder(&f, &[0.0, 0.0], 1, 1.0, &z).unwrap();
        assert!((v - 0.25).abs() < 1e-9);
    }

    #[test]
    fn order_zero_remainder_is_scaled_difference_quotient() {
        let x = [0.3, 0.2];
        let f = corpus::sample("gauss", patch(&x, 0.2, 0.002)).unwrap();
        let sched = RadiusSchedule::new(0.048, 0.5, 4).unwrap();
        let td = taylor_data(&f, &x, 0, &sched, &RepresentativeOptions::default()).unwrap();
        let lat = ReferenceLattice::new(&Region::ball(&[0.0, 0.0], 1.0).unwrap(), 11).unwrap();
        let h = 0.1;
        let r = remainder(&f, &td, h, &lat).unwrap();
        let q = crate::differentiability::difference_quotient(&f, &x, h, &lat).unwrap();
        let fx = f.interpolate(&x).unwrap();
        for (rv, qv) in r.values().iter().zip(q.values()) {
            assert!((rv - h * qv - (fx - td.coefficients[0].value)).abs() < 1e-12);
        }
    }

    #[test]
    fn abs_at_origin_stalls() {
        let x = [0.0, 0.0];
        let f = corpus::sample("abs_nd", patch(&x, 0.3, 0.0005)).unwrap();
        let sched = RadiusSchedule::new(0.016, 0.5, 4).unwrap();
        // Ball averages of |y| shrink like 2r/3, so the value needs a looser tolerance.
        let opts = RepresentativeOptions { rep_tol: 1e-2, ..RepresentativeOptions::default() };
        let td = taylor_data(&f, &x, 1, &sched, &opts).unwrap();
        assert!(td.all_converged(), "{td:?}");
        let lat = ReferenceLattice::new(&Region::ball(&[0.0, 0.0], 1.0).unwrap(), 41).unwrap();
        let hs = geometric(0.2, 0.5, 4).unwrap();
        let study = remainder_study(&f, &td, 1.0, &lat, &hs, RemainderNorm::Full, &ConvergenceCriteria::default()).unwrap();
        assert_eq!(study.report.verdict, Verdict::Stalls);
    }

    #[test]
    fn orders_above_three_are_rejected() {
        let f = corpus::sample("gauss", Arc::new(Grid::cube(1, -1.0, 1.0, 101).unwrap())).unwrap();
        let sched = RadiusSchedule::new(0.4, 0.5, 4).unwrap();
        assert!(taylor_data(&f, &[0.0], 4, &sched, &RepresentativeOptions::default()).is_err());
        assert!(IntegralRemainder::new(&f, &[0.0], 0).is_err());
    }
}
