//! Upper estimates of the Hausdorff pre-measures `H^s_delta` from dyadic
//! covers of sample clouds, and the qualitative check that sets with
//! vanishing `H^{n-p}` have capacity-null behaviour.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::capacity::{cap_null_classify, CapacityOptions, CondenserSet, NullClassification, NullVerdict, Refinement};
use crate::error::{domain, numeric, Error, Result};
use crate::grid::{Grid, Region};
use crate::special::unit_ball_volume;

/// `alpha(s) = pi^{s/2} / Gamma(s/2 + 1)`.
pub fn alpha(s: f64) -> f64 {
    unit_ball_volume(s)
}

/// A finite sample cloud standing in for a set, with a resolution radius:
/// every point of the set is within `resolution` of some sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
    dim: usize,
    resolution: f64,
}

impl PointSet {
    /// Checked constructor; all points share one dimension.
    pub fn new(points: Vec<Vec<f64>>, dim: usize, resolution: f64) -> Result<Self> {
        if dim == 0 {
            return Err(domain!("point set dimension must be >= 1"));
        }
        if !(resolution >= 0.0 && resolution.is_finite()) {
            return Err(domain!("resolution must be finite and >= 0, got {resolution}"));
        }
        if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
            return Err(domain!("every point needs {dim} finite coordinates"));
        }
        Ok(Self { points, dim, resolution })
    }

    /// Single point with zero resolution.
    pub fn point(x: &[f64]) -> Result<Self> {
        Self::new(vec![x.to_vec()], x.len(), 0.0)
    }

    /// `count` equispaced samples of the segment `[a, b]`, resolution half a step.
    pub fn segment(a: &[f64], b: &[f64], count: usize) -> Result<Self> {
        if count < 2 || a.len() != b.len() {
            return Err(domain!("segment needs matching endpoints and >= 2 samples"));
        }
        let pts: Vec<Vec<f64>> = (0..count)
            .map(|j| {
                let t = j as f64 / (count - 1) as f64;
                a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
            })
            .collect();
        let len = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt();
        Self::new(pts, a.len(), 0.5 * len / (count - 1) as f64)
    }

    /// Nodes of `grid` inside a geometric region, with resolution half the
    /// lattice diagonal.
    pub fn from_region(region: &Region, grid: &Grid) -> Result<Self> {
        let mask = region.node_mask(grid)?;
        let points = (0..grid.len()).filter(|&i| mask[i]).map(|i| grid.node_point(i)).collect();
        let diag = grid.spacing().iter().map(|h| h * h).sum::<f64>().sqrt();
        Self::new(points, grid.dim(), 0.5 * diag)
    }

    /// Samples.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Resolution radius.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }
}

impl CondenserSet for PointSet {
    /// Nodes within the resolution radius of a sample, plus the nearest node
    /// of every sample.
    fn condenser_mask(&self, grid: &Grid) -> Result<Vec<bool>> {
        if grid.dim() != self.dim {
            return Err(domain!("point set has dimension {}, grid has {}", self.dim, grid.dim()));
        }
        let mut mask = vec![false; grid.len()];
        let mut y = vec![0.0; self.dim];
        for p in &self.points {
            if !grid.contains_point(p) {
                return Err(domain!("sample {p:?} lies outside the lattice box"));
            }
            mask[grid.nearest_node(p)] = true;
        }
        if self.resolution > 0.0 {
            let r2 = self.resolution * self.resolution;
            for (i, m) in mask.iter_mut().enumerate() {
                grid.node_coords(i, &mut y);
                if !*m {
                    *m = self.points.iter().any(|p| p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r2);
                }
            }
        }
        Ok(mask)
    }
}

/// One closed axis-aligned cover set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverCell {
    /// Lower corner.
    pub lower: Vec<f64>,
    /// Upper corner.
    pub upper: Vec<f64>,
}

impl CoverCell {
    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    fn contains(&self, y: &[f64]) -> bool {
        let slack = 1e-12 * (1.0 + self.diameter());
        y.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *v >= a - slack && *v <= b + slack)
    }

    fn union(&self, other: &Self) -> Self {
        Self {
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| a.min(*b)).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a.max(*b)).collect(),
        }
    }
}

/// `sum alpha(s) (diam C / 2)^s` over a cover, with `0^0 = 1`.
pub fn cover_value(cells: &[CoverCell], s: f64) -> f64 {
    cells.iter().map(|c| cell_cost(c.diameter(), s)).sum()
}

fn cell_cost(diam: f64, s: f64) -> f64 {
    alpha(s) * (0.5 * diam).powf(s)
}

/// A cover at the finest level plus the value per level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringEstimate {
    /// Dimension parameter.
    pub s: f64,
    /// Coarsest `delta`.
    pub delta: f64,
    /// Cover at the finest level.
    pub cells: Vec<CoverCell>,
    /// Value of [`Self::cells`].
    pub value: f64,
    /// `(delta_l, value_l)` for `delta_l = delta 2^{-l}`.
    pub history: Vec<(f64, f64)>,
}

impl CoveringEstimate {
    /// Value of the same cover for another `s`.
    pub fn value_at(&self, s: f64) -> f64 {
        cover_value(&self.cells, s)
    }
}

/// Cover of `set` by boxes of diameter at most `delta`.
///
/// Samples are binned into dyadic cubes of side at most `(delta - 2 rho) /
/// sqrt(n)`, anchored at the lower corner of the bounding box. Each cube is
/// shrunk to the bounding box of its samples grown by `rho`, then consecutive
/// cubes are merged while the union stays within `delta` and the cost does not
/// grow.
pub fn dyadic_cover(set: &PointSet, s: f64, delta: f64) -> Result<Vec<CoverCell>> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(domain!("Hausdorff dimension parameter must be >= 0, got {s}"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain!("delta must be positive, got {delta}"));
    }
    if set.points.is_empty() {
        return Ok(Vec::new());
    }
    let n = set.dim;
    let rho = set.resolution;
    if delta <= 2.0 * rho {
        return Err(Error::Resolution(alloc::format!(
            "delta {delta:e} does not exceed twice the sample resolution {rho:e}"
        )));
    }
    let mut lo = set.points[0].clone();
    let mut hi = set.points[0].clone();
    for p in &set.points {
        for d in 0..n {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let target = (delta - 2.0 * rho) / (n as f64).sqrt();
    let extent = (0..n).map(|d| hi[d] - lo[d]).fold(0.0f64, f64::max);
    let mut side = if extent > 0.0 { extent } else { target };
    while side > target {
        side *= 0.5;
    }
    let mut bins: BTreeMap<Vec<i64>, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in &set.points {
        let key: Vec<i64> = (0..n).map(|d| ((p[d] - lo[d]) / side).floor() as i64).collect();
        let entry = bins.entry(key).or_insert_with(|| (p.clone(), p.clone()));
        for d in 0..n {
            entry.0[d] = entry.0[d].min(p[d]);
            entry.1[d] = entry.1[d].max(p[d]);
        }
    }
    let mut cells: Vec<CoverCell> = Vec::new();
    for (_, (a, b)) in bins {
        let cell = CoverCell {
            lower: a.iter().map(|v| v - rho).collect(),
            upper: b.iter().map(|v| v + rho).collect(),
        };
        if let Some(last) = cells.last_mut() {
            let merged = last.union(&cell);
            let dm = merged.diameter();
            if dm <= delta && cell_cost(dm, s) <= cell_cost(last.diameter(), s) + cell_cost(cell.diameter(), s) {
                *last = merged;
                continue;
            }
        }
        cells.push(cell);
    }
    for p in &set.points {
        if !cells.iter().any(|c| c.contains(p)) {
            return Err(numeric!("cover misses sample {p:?}"));
        }
    }
    Ok(cells)
}

/// Covers at `delta 2^{-l}` for `l < levels`; the reported cover is the finest.
pub fn hausdorff_upper(set: &PointSet, s: f64, delta: f64, levels: usize) -> Result<CoveringEstimate> {
    if levels == 0 {
        return Err(domain!("need at least one covering level"));
    }
    let mut history = Vec::with_capacity(levels);
    let mut cells = Vec::new();
    for l in 0..levels {
        let dl = delta * 0.5.powi(l as i32);
        cells = dyadic_cover(set, s, dl)?;
        history.push((dl, cover_value(&cells, s)));
    }
    let value = history[levels - 1].1;
    Ok(CoveringEstimate { s, delta, cells, value, history })
}

/// Covering and capacity trajectories of the consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct FrostmanReport {
    /// `H^{n-p}` covering estimate.
    pub hausdorff: CoveringEstimate,
    /// Whether the covering values tend to zero.
    pub vanishes: bool,
    /// Capacity study; only run when the covering values vanish.
    pub capacity: Option<NullClassification>,
    /// `Some(true)` if the capacity study agrees, `None` if nothing is asserted.
    pub consistent: Option<bool>,
}

/// Whether a covering history tends to zero: the last value is at most
/// `1e-12`, or at most `1e-3` of the first.
pub fn vanishes(history: &[(f64, f64)]) -> bool {
    match (history.first(), history.last()) {
        (Some(first), Some(last)) => last.1 <= 1e-12 || last.1 <= 1e-3 * first.1,
        _ => true,
    }
}

/// Settings of [`frostman_consistency`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrostmanSettings {
    /// Coarsest covering scale.
    pub delta: f64,
    /// Covering levels.
    pub levels: usize,
    /// Fixed capacity domain.
    pub omega: Region,
    /// Capacity refinement.
    pub refinement: Refinement,
    /// Optimizer settings.
    pub capacity: CapacityOptions,
}

/// If the `H^{n-p}` covers of `set` vanish, the capacity refinement study
/// must suggest a null set. Requires `1 <= p < n`.
pub fn frostman_consistency(set: &PointSet, p: f64, settings: &FrostmanSettings) -> Result<FrostmanReport> {
    let n = set.dim as f64;
    if !(p >= 1.0 && p < n) {
        return Err(Error::Precondition(alloc::format!("need 1 <= p < n, got p = {p}, n = {n}")));
    }
    let hausdorff = hausdorff_upper(set, n - p, settings.delta, settings.levels)?;
    let vanish = vanishes(&hausdorff.history);
    let (capacity, consistent) = if vanish {
        let c = cap_null_classify(set, &settings.omega, p, &settings.refinement, &settings.capacity)?;
        let ok = c.verdict == NullVerdict::NullSuggested;
        (Some(c), Some(ok))
    } else {
        (None, None)
    };
    Ok(FrostmanReport { hausdorff, vanishes: vanish, capacity, consistent })
}
