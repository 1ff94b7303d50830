//! `(parameter, error)` sequences for `t -> 0` style studies, with a fitted
//! log-log slope and a closed verdict.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Result};
use crate::linalg::fit_line;

/// Verdict of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Last error below tolerance and the fitted rate above the minimum.
    ConvergesToZero,
    /// Last error above tolerance and no decay worth the name.
    Stalls,
    /// Neither criterion fires.
    Inconclusive,
}

impl Verdict {
    /// Stable name used in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ConvergesToZero => "ConvergesToZero",
            Verdict::Stalls => "Stalls",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thresholds behind [`Verdict`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCriteria {
    /// Upper bound on the last error for `ConvergesToZero`.
    pub conv_tol: f64,
    /// Minimum fitted slope of `log error` against `log parameter`.
    pub slope_min: f64,
    /// Errors at or below this are rounding noise. If every error is, the
    /// sequence counts as exactly zero and the slope is reported as `+inf`.
    pub zero_floor: f64,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        Self { conv_tol: 1e-2, slope_min: 0.5, zero_floor: 1e-10 }
    }
}

/// Parameter/error pairs of a study plus the fitted rate and verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Geometric parameter sequence (t, h or r), decreasing.
    pub params: Vec<f64>,
    /// Nonnegative errors, one per parameter.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log max(error, floor)` vs `log param`.
    pub slope: f64,
    /// Closed verdict.
    pub verdict: Verdict,
}

impl ConvergenceReport {
    /// Fits the slope and assigns the verdict. Needs at least 4 points.
    pub fn new(params: Vec<f64>, errors: Vec<f64>, criteria: &ConvergenceCriteria) -> Result<Self> {
        let floors = vec![0.0; errors.len()];
        Self::with_floors(params, errors, &floors, criteria)
    }

    /// Like [`Self::new`] with a rounding floor per point, for studies whose
    /// noise level depends on the parameter (dividing by `h^k` amplifies
    /// rounding). Each effective floor is `max(floors[j], zero_floor)`.
    pub fn with_floors(
        params: Vec<f64>,
        errors: Vec<f64>,
        floors: &[f64],
        criteria: &ConvergenceCriteria,
    ) -> Result<Self> {
        if params.len() != errors.len() || params.len() < 4 || floors.len() != errors.len() {
            return Err(domain!(
                "convergence report needs >= 4 matching points, got {} params / {} errors / {} floors",
                params.len(),
                errors.len(),
                floors.len()
            ));
        }
        if errors.iter().any(|e| !(*e >= 0.0)) || params.iter().any(|t| !(*t > 0.0)) {
            return Err(domain!("errors must be >= 0 and parameters > 0"));
        }
        let floor: Vec<f64> = floors.iter().map(|f| f.max(criteria.zero_floor)).collect();
        let exact = errors.iter().zip(&floor).all(|(e, f)| e <= f);
        let slope = if exact {
            f64::INFINITY
        } else {
            let xs: Vec<f64> = params.iter().map(|t| t.ln()).collect();
            let ys: Vec<f64> = errors.iter().zip(&floor).map(|(e, f)| e.max(*f).ln()).collect();
            fit_line(&xs, &ys).map(|(s, _)| s).unwrap_or(0.0)
        };
        let last = *errors.last().expect("nonempty");
        let verdict = if last < criteria.conv_tol && (exact || slope > criteria.slope_min) {
            Verdict::ConvergesToZero
        } else if last >= criteria.conv_tol && slope <= criteria.slope_min {
            Verdict::Stalls
        } else {
            Verdict::Inconclusive
        };
        Ok(Self { params, errors, slope, verdict })
    }

    /// Last error of the sequence.
    pub fn last_error(&self) -> f64 {
        *self.errors.last().expect("report is never empty")
    }
}

/// `count` terms `first * ratio^j`.
pub fn geometric(first: f64, ratio: f64, count: usize) -> Result<Vec<f64>> {
    if !(first > 0.0 && ratio > 0.0 && ratio < 1.0) {
        return Err(domain!("geometric schedule needs first > 0 and ratio in (0, 1)"));
    }
    Ok((0..count).map(|j| first * ratio.powi(j as i32)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn linear_decay_converges_with_unit_slope() {
        let ts = geometric(0.4, 0.5, 6).unwrap();
        let errs: Vec<f64> = ts.iter().map(|t| 0.02 * t).collect();
        let r = ConvergenceReport::new(ts, errs, &ConvergenceCriteria::default()).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::ConvergesToZero);
    }

    #[test]
    fn constant_error_stalls() {
        let ts = geometric(0.4, 0.5, 4).unwrap();
        let r = ConvergenceReport::new(ts, vec![1.4; 4], &ConvergenceCriteria::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Stalls);
        assert!(r.slope.abs() < 1e-12);
    }

    #[test]
    fn rounding_noise_counts_as_exact() {
        let ts = geometric(0.4, 0.5, 5).unwrap();
        let r = ConvergenceReport::new(ts, vec![0.0, 1e-14, 3e-15, 0.0, 2e-13], &ConvergenceCriteria::default())
            .unwrap();
        assert_eq!(r.verdict, Verdict::ConvergesToZero);
        assert!(r.slope.is_infinite());
    }

    #[test]
    fn small_but_flat_is_inconclusive() {
        let ts = geometric(0.4, 0.5, 4).unwrap();
        let r = ConvergenceReport::new(ts, vec![1e-3; 4], &ConvergenceCriteria::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn rejects_short_or_negative_sequences() {
        let c = ConvergenceCriteria::default();
        assert!(ConvergenceReport::new(vec![1.0, 0.5, 0.25], vec![1.0; 3], &c).is_err());
        assert!(ConvergenceReport::new(vec![1.0, 0.5, 0.25, 0.1], vec![1.0, -1.0, 0.0, 0.0], &c).is_err());
        assert!(geometric(1.0, 1.5, 4).is_err());
    }
}
