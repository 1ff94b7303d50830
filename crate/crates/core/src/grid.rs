//! Uniform rectangular lattices, sampled scalar and vector fields, finite
//! difference derivatives, and region quadrature (norms and ball averages).
//!
//! Quadrature is node based: each node owns its dual cell
//! `[y - h/2, y + h/2]` clipped to the lattice box. A region weights a node by
//! the dual-cell volume times the fraction of the cell it covers. For boxes
//! the fraction is exact; for balls, cells that straddle the sphere use the
//! fraction of `3^n` sub-cell centres that fall inside. All reductions run in
//! lexicographic node order, so results do not depend on scheduling.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Result};

/// Relative slack used when testing whether a point lies in the lattice box.
const BOX_SLACK: f64 = 1e-12;
/// Relative slack on squared radii, so points that sit on a sphere up to
/// rounding are classified the same way at mirror-image positions.
const SPHERE_SLACK: f64 = 1e-12;

/// A uniform lattice on an axis-aligned box in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    /// Builds a lattice with `counts[d]` nodes on `[lower[d], upper[d]]`.
    pub fn new(lower: &[f64], upper: &[f64], counts: &[usize]) -> Result<Self> {
        let n = lower.len();
        if n == 0 || upper.len() != n || counts.len() != n {
            return Err(domain!("grid axes disagree: {} / {} / {}", n, upper.len(), counts.len()));
        }
        for d in 0..n {
            if !(lower[d].is_finite() && upper[d].is_finite() && lower[d] < upper[d]) {
                return Err(domain!("axis {d}: need finite lower < upper, got [{}, {}]", lower[d], upper[d]));
            }
            if counts[d] < 3 {
                return Err(domain!("axis {d}: need at least 3 nodes, got {}", counts[d]));
            }
        }
        let spacing: Vec<f64> = (0..n)
            .map(|d| (upper[d] - lower[d]) / (counts[d] - 1) as f64)
            .collect();
        let mut strides = vec![1usize; n];
        for d in (0..n - 1).rev() {
            strides[d] = strides[d + 1] * counts[d + 1];
        }
        let len = counts.iter().product();
        Ok(Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            counts: counts.to_vec(),
            spacing,
            strides,
            len,
        })
    }

    /// Same box `[lo, hi]^n` and node count on every axis.
    pub fn cube(n: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(&vec![lo; n], &vec![hi; n], &vec![count; n])
    }

    /// A lattice with a node exactly at `center`, spacing `spacing` and
    /// half-width at least `half_width` on every axis.
    pub fn centered(center: &[f64], half_width: f64, spacing: f64) -> Result<Self> {
        if !(half_width > 0.0 && spacing > 0.0) {
            return Err(domain!("centered grid needs positive half-width and spacing"));
        }
        let cells = (half_width / spacing - 1e-9).ceil().max(1.0) as usize;
        let hw = cells as f64 * spacing;
        let lower: Vec<f64> = center.iter().map(|c| c - hw).collect();
        let upper: Vec<f64> = center.iter().map(|c| c + hw).collect();
        Self::new(&lower, &upper, &vec![2 * cells + 1; center.len()])
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }
    /// Total node count.
    pub fn len(&self) -> usize {
        self.len
    }
    /// Always false; grids have at least `3^n` nodes.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    /// Nodes per axis.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    /// Spacing per axis.
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    /// Largest spacing over the axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().fold(0.0, |a, &b| a.max(b))
    }
    /// Lower box corner.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    /// Upper box corner.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    /// Linear-index stride per axis (last axis fastest).
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    /// Volume of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Coordinate of node `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.counts[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing[axis]
        }
    }

    /// Writes the per-axis indices of node `idx` into `out`.
    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for d in 0..self.dim() {
            out[d] = idx / self.strides[d];
            idx %= self.strides[d];
        }
    }

    /// Linear index of a per-axis index tuple.
    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Writes the coordinates of node `idx` into `out`.
    pub fn node_coords(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for d in 0..self.dim() {
            let i = rest / self.strides[d];
            rest %= self.strides[d];
            out[d] = self.coord(d, i);
        }
    }

    /// Coordinates of node `idx`.
    pub fn node_point(&self, idx: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.node_coords(idx, &mut y);
        y
    }

    /// Index of the node closest to `y` (clamped into the box).
    pub fn nearest_node(&self, y: &[f64]) -> usize {
        let multi: Vec<usize> = (0..self.dim())
            .map(|d| {
                let s = ((y[d] - self.lower[d]) / self.spacing[d]).round();
                s.clamp(0.0, (self.counts[d] - 1) as f64) as usize
            })
            .collect();
        self.linear_index(&multi)
    }

    fn slack(&self, axis: usize) -> f64 {
        BOX_SLACK * (self.upper[axis] - self.lower[axis]).max(1.0)
    }

    /// Whether `y` lies in the closed lattice box (up to rounding slack).
    pub fn contains_point(&self, y: &[f64]) -> bool {
        (0..self.dim()).all(|d| {
            y[d] >= self.lower[d] - self.slack(d) && y[d] <= self.upper[d] + self.slack(d)
        })
    }

    /// Whether the closed box `[lo, hi]` lies in the lattice box.
    pub fn contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        self.contains_point(lo) && self.contains_point(hi)
    }

    /// Whether the ball `B(x, r)` lies in the lattice box.
    pub fn contains_ball(&self, x: &[f64], r: f64) -> bool {
        (0..self.dim()).all(|d| {
            x[d] - r >= self.lower[d] - self.slack(d) && x[d] + r <= self.upper[d] + self.slack(d)
        })
    }

    /// Per-axis extent of the dual cell of node index `i` (clipped to the box).
    fn dual_interval(&self, axis: usize, i: usize) -> (f64, f64) {
        let c = self.coord(axis, i);
        let half = 0.5 * self.spacing[axis];
        ((c - half).max(self.lower[axis]), (c + half).min(self.upper[axis]))
    }

    /// Volume of the (clipped) dual cell of node `idx`.
    pub fn node_volume(&self, idx: usize) -> f64 {
        let mut rest = idx;
        let mut vol = 1.0;
        for d in 0..self.dim() {
            let i = rest / self.strides[d];
            rest %= self.strides[d];
            let (a, b) = self.dual_interval(d, i);
            vol *= b - a;
        }
        vol
    }

    /// Node index range `[i0, i1]` per axis whose dual cells can meet `[lo, hi]`.
    fn index_ranges(&self, lo: &[f64], hi: &[f64]) -> Option<Vec<(usize, usize)>> {
        let mut ranges = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let h = self.spacing[d];
            let a = ((lo[d] - self.lower[d]) / h - 0.5).floor().max(0.0);
            let b = ((hi[d] - self.lower[d]) / h + 0.5).ceil();
            let top = (self.counts[d] - 1) as f64;
            if b < 0.0 || a > top {
                return None;
            }
            ranges.push((a as usize, b.min(top) as usize));
        }
        Some(ranges)
    }

    /// Quadrature weights of `region` on this lattice as `(node, weight)`
    /// pairs with positive weight, in lexicographic node order.
    pub fn region_weights(&self, region: &Region) -> Result<Vec<(usize, f64)>> {
        let n = self.dim();
        let mut out = Vec::new();
        match region {
            Region::NodeMask(mask) => {
                if mask.len() != self.len {
                    return Err(domain!("node mask has {} entries, grid has {}", mask.len(), self.len));
                }
                for (idx, &inside) in mask.iter().enumerate() {
                    if inside {
                        out.push((idx, self.node_volume(idx)));
                    }
                }
            }
            Region::Box { lower, upper } => {
                check_dim(n, lower.len())?;
                let Some(ranges) = self.index_ranges(lower, upper) else {
                    return Ok(out);
                };
                for_each_in_ranges(self, &ranges, |idx, multi| {
                    let mut w = 1.0;
                    for d in 0..n {
                        let (a, b) = self.dual_interval(d, multi[d]);
                        let overlap = b.min(upper[d]) - a.max(lower[d]);
                        if overlap <= 0.0 {
                            return;
                        }
                        w *= overlap;
                    }
                    out.push((idx, w));
                });
            }
            Region::Ball { center, radius } => {
                check_dim(n, center.len())?;
                let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
                let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
                let Some(ranges) = self.index_ranges(&lo, &hi) else {
                    return Ok(out);
                };
                let r2 = radius * radius;
                let mut cell_lo = vec![0.0; n];
                let mut cell_hi = vec![0.0; n];
                for_each_in_ranges(self, &ranges, |idx, multi| {
                    let (mut near, mut far) = (0.0, 0.0);
                    let mut vol = 1.0;
                    for d in 0..n {
                        let (a, b) = self.dual_interval(d, multi[d]);
                        cell_lo[d] = a;
                        cell_hi[d] = b;
                        vol *= b - a;
                        let c = center[d];
                        let dn = if c < a { a - c } else if c > b { c - b } else { 0.0 };
                        let df = (c - a).abs().max((b - c).abs());
                        near += dn * dn;
                        far += df * df;
                    }
                    if near >= r2 * (1.0 - SPHERE_SLACK) {
                        return;
                    }
                    let frac = if far <= r2 * (1.0 + SPHERE_SLACK) {
                        1.0
                    } else {
                        subcell_fraction(center, r2, &cell_lo, &cell_hi)
                    };
                    if frac > 0.0 {
                        out.push((idx, vol * frac));
                    }
                });
            }
        }
        Ok(out)
    }

    /// Ball quadrature weights, erroring when `B(x, r)` leaves the lattice box.
    pub fn ball_weights(&self, x: &[f64], r: f64) -> Result<Vec<(usize, f64)>> {
        check_dim(self.dim(), x.len())?;
        if !(r > 0.0) {
            return Err(domain!("ball radius must be positive, got {r}"));
        }
        if !self.contains_ball(x, r) {
            return Err(domain!("ball B({x:?}, {r}) exits the lattice box"));
        }
        let w = self.region_weights(&Region::Ball { center: x.to_vec(), radius: r })?;
        if w.is_empty() {
            return Err(domain!("ball B({x:?}, {r}) contains no lattice node"));
        }
        Ok(w)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(domain!("dimension mismatch: expected {expected}, got {got}"));
    }
    Ok(())
}

/// Fraction of the `3^n` sub-cell centres of `[lo, hi]` inside the ball.
fn subcell_fraction(center: &[f64], r2: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let n = center.len();
    let total = 3usize.pow(n as u32);
    let mut inside = 0usize;
    for code in 0..total {
        let mut rest = code;
        let mut dist2 = 0.0;
        for d in 0..n {
            let j = (rest % 3) as f64;
            rest /= 3;
            let y = lo[d] + (j + 0.5) * (hi[d] - lo[d]) / 3.0;
            dist2 += (y - center[d]) * (y - center[d]);
        }
        if dist2 < r2 * (1.0 - SPHERE_SLACK) {
            inside += 1;
        }
    }
    inside as f64 / total as f64
}

/// Visits every node in the per-axis index box `ranges` in lexicographic order.
pub(crate) fn for_each_in_ranges(
    grid: &Grid,
    ranges: &[(usize, usize)],
    mut visit: impl FnMut(usize, &[usize]),
) {
    let n = grid.dim();
    let mut multi: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|r| r.0 > r.1) {
        return;
    }
    loop {
        visit(grid.linear_index(&multi), &multi);
        let mut d = n;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            if multi[d] < ranges[d].1 {
                multi[d] += 1;
                break;
            }
            multi[d] = ranges[d].0;
        }
    }
}

/// Quadrature domain: a ball, an axis-aligned box, or an explicit node set.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Open ball `B(center, radius)`.
    Ball {
        /// Centre point.
        center: Vec<f64>,
        /// Radius, positive.
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        /// Lower corner.
        lower: Vec<f64>,
        /// Upper corner, componentwise `>= lower`.
        upper: Vec<f64>,
    },
    /// Explicit node set of a specific lattice.
    NodeMask(Vec<bool>),
}

impl Region {
    /// Checked ball constructor.
    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain!("ball radius must be positive, got {radius}"));
        }
        Ok(Region::Ball { center: center.to_vec(), radius })
    }

    /// Checked box constructor.
    pub fn cuboid(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(upper).any(|(a, b)| !(a <= b)) {
            return Err(domain!("box corners must be ordered: {lower:?} / {upper:?}"));
        }
        Ok(Region::Box { lower: lower.to_vec(), upper: upper.to_vec() })
    }

    /// Bounding box for geometric regions; `None` for node masks.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Region::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            Region::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            Region::NodeMask(_) => None,
        }
    }

    /// Point membership for geometric regions (open ball, closed box).
    /// Node masks answer `false`; use [`Region::node_mask`] instead.
    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => {
                center.iter().zip(y).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() < radius * radius
            }
            Region::Box { lower, upper } => {
                y.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| v >= a && v <= b)
            }
            Region::NodeMask(_) => false,
        }
    }

    /// Nodes of `grid` belonging to the region.
    pub fn node_mask(&self, grid: &Grid) -> Result<Vec<bool>> {
        match self {
            Region::NodeMask(mask) => {
                if mask.len() != grid.len() {
                    return Err(domain!("node mask has {} entries, grid has {}", mask.len(), grid.len()));
                }
                Ok(mask.clone())
            }
            _ => {
                let mut y = vec![0.0; grid.dim()];
                Ok((0..grid.len())
                    .map(|i| {
                        grid.node_coords(i, &mut y);
                        self.contains(&y)
                    })
                    .collect())
            }
        }
    }

    /// Diameter of a geometric region; `None` for masks.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            Region::Ball { radius, .. } => Some(2.0 * radius),
            Region::Box { lower, upper } => Some(
                lower.iter().zip(upper).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
            ),
            Region::NodeMask(_) => None,
        }
    }

    /// Whether every node of the region sits at least `k` nodes away from the
    /// lattice boundary (so order-`k` nested stencils are centred there).
    pub fn inset_by(&self, grid: &Grid, k: usize) -> Result<bool> {
        if k == 0 {
            return Ok(true);
        }
        match self.bounding_box() {
            Some((lo, hi)) => Ok((0..grid.dim()).all(|d| {
                let margin = k as f64 * grid.spacing()[d] - grid.slack(d);
                lo[d] >= grid.lower()[d] + margin && hi[d] <= grid.upper()[d] - margin
            })),
            None => {
                let mask = self.node_mask(grid)?;
                let mut multi = vec![0; grid.dim()];
                Ok(mask.iter().enumerate().filter(|(_, m)| **m).all(|(i, _)| {
                    grid.multi_index(i, &mut multi);
                    (0..grid.dim()).all(|d| multi[d] >= k && multi[d] + k < grid.counts()[d])
                }))
            }
        }
    }
}

/// Read access shared by scalar and vector fields.
pub trait Field {
    /// Underlying lattice.
    fn grid(&self) -> &Grid;
    /// Number of value components per node (1 for scalar fields).
    fn components(&self) -> usize;
    /// Values of one component, one per node.
    fn component(&self, c: usize) -> &[f64];

    /// Value of the field at node `idx`, written into `out`.
    fn value_at(&self, idx: usize, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.component(c)[idx];
        }
    }

    /// `|v(idx) - c|` (Euclidean over components).
    fn distance_at(&self, idx: usize, c: &[f64]) -> f64 {
        let m = self.components();
        if m == 1 {
            return (self.component(0)[idx] - c[0]).abs();
        }
        (0..m)
            .map(|k| {
                let d = self.component(k)[idx] - c[k];
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Samples of a scalar function, one finite value per node.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps node values; rejects wrong lengths and non-finite entries.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(domain!("{} values for a grid of {} nodes", values.len(), grid.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain!("non-finite value {} at node {i}", values[i]));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut y = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.node_coords(i, &mut y);
                f(&y)
            })
            .collect();
        Self::new(grid, values)
    }

    /// Shared lattice handle.
    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Node values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same lattice.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(domain!("fields live on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.grid.clone(), values)
    }

    /// `c * f`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// `f + g`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `f - g`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `f * g`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Finite-difference partial derivative along `axis`: central differences
    /// inside, one-sided second-order stencils on the two boundary layers.
    pub fn partial(&self, axis: usize) -> Self {
        let g = &*self.grid;
        let stride = g.strides()[axis];
        let count = g.counts()[axis];
        let h = g.spacing()[axis];
        let v = &self.values;
        let mut out = vec![0.0; v.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let i = (idx / stride) % count;
            *o = if i == 0 {
                (-3.0 * v[idx] + 4.0 * v[idx + stride] - v[idx + 2 * stride]) / (2.0 * h)
            } else if i + 1 == count {
                (3.0 * v[idx] - 4.0 * v[idx - stride] + v[idx - 2 * stride]) / (2.0 * h)
            } else {
                (v[idx + stride] - v[idx - stride]) / (2.0 * h)
            };
        }
        Self { grid: self.grid.clone(), values: out }
    }

    /// Nested finite differences `d^alpha f` (`alpha[d]` derivatives along
    /// axis `d`, applied axis by axis).
    pub fn derivative(&self, alpha: &[u32]) -> Self {
        let mut cur = self.clone();
        for (axis, &times) in alpha.iter().enumerate() {
            for _ in 0..times {
                cur = cur.partial(axis);
            }
        }
        cur
    }

    /// Gradient by [`GridFunction::partial`] on every axis.
    pub fn gradient(&self) -> VectorField {
        VectorField {
            grid: self.grid.clone(),
            components: (0..self.grid.dim()).map(|d| self.partial(d).values).collect(),
        }
    }

    /// Tensor-product cubic Lagrange interpolation at `y` (4 nodes per axis,
    /// stencil shifted inward near the boundary).
    pub fn interpolate(&self, y: &[f64]) -> Result<f64> {
        let g = &*self.grid;
        let n = g.dim();
        check_dim(n, y.len())?;
        if !g.contains_point(y) {
            return Err(domain!("interpolation point {y:?} outside the lattice box"));
        }
        let mut base = [0usize; 8];
        let mut weights = [[0.0f64; 4]; 8];
        let mut width = [0usize; 8];
        assert!(n <= 8, "interpolation supports up to 8 dimensions");
        for d in 0..n {
            let count = g.counts()[d];
            let s = (y[d] - g.lower()[d]) / g.spacing()[d];
            let w = count.min(4);
            let start = (s.floor() as i64 - 1).clamp(0, (count - w) as i64) as usize;
            base[d] = start;
            width[d] = w;
            for j in 0..w {
                let xj = (start + j) as f64;
                let mut l = 1.0;
                for m in 0..w {
                    if m != j {
                        let xm = (start + m) as f64;
                        l *= (s - xm) / (xj - xm);
                    }
                }
                weights[d][j] = l;
            }
        }
        let mut acc = 0.0;
        let mut offs = [0usize; 8];
        loop {
            let mut w = 1.0;
            let mut idx = 0;
            for d in 0..n {
                w *= weights[d][offs[d]];
                idx += (base[d] + offs[d]) * g.strides()[d];
            }
            acc += w * self.values[idx];
            let mut d = n;
            loop {
                if d == 0 {
                    return Ok(acc);
                }
                d -= 1;
                offs[d] += 1;
                if offs[d] < width[d] {
                    break;
                }
                offs[d] = 0;
            }
        }
    }
}

impl Field for GridFunction {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn components(&self) -> usize {
        1
    }
    fn component(&self, c: usize) -> &[f64] {
        assert_eq!(c, 0, "scalar field has one component");
        &self.values
    }
}

/// Per-node vectors (typically a gradient), stored component-major.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    /// Wraps component arrays; every array must match the lattice size and be finite.
    pub fn new(grid: Arc<Grid>, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(domain!("vector field needs at least one component"));
        }
        for (c, comp) in components.iter().enumerate() {
            if comp.len() != grid.len() {
                return Err(domain!("component {c} has {} values, grid has {}", comp.len(), grid.len()));
            }
            if comp.iter().any(|v| !v.is_finite()) {
                return Err(domain!("component {c} has non-finite entries"));
            }
        }
        Ok(Self { grid, components })
    }

    /// Samples a vector-valued function with `m` components.
    pub fn from_fn(grid: Arc<Grid>, m: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let mut y = vec![0.0; grid.dim()];
        let mut v = vec![0.0; m];
        let mut components = vec![Vec::with_capacity(grid.len()); m];
        for i in 0..grid.len() {
            grid.node_coords(i, &mut y);
            f(&y, &mut v);
            for (c, comp) in components.iter_mut().enumerate() {
                comp.push(v[c]);
            }
        }
        Self::new(grid, components)
    }

    /// Stacks scalar fields on a common lattice.
    pub fn from_scalars(fields: &[GridFunction]) -> Result<Self> {
        let Some(first) = fields.first() else {
            return Err(domain!("vector field needs at least one component"));
        };
        if fields.iter().any(|f| f.grid != first.grid) {
            return Err(domain!("components live on different grids"));
        }
        Self::new(first.grid.clone(), fields.iter().map(|f| f.values.clone()).collect())
    }

    /// One component as a scalar field.
    pub fn scalar(&self, c: usize) -> GridFunction {
        GridFunction { grid: self.grid.clone(), values: self.components[c].clone() }
    }
}

impl Field for VectorField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn components(&self) -> usize {
        self.components.len()
    }
    fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }
}

/// Finite-difference gradient of a scalar field.
pub fn gradient_fd(f: &GridFunction) -> VectorField {
    f.gradient()
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(domain!("exponent p must be a finite real >= 1, got {p}"));
    }
    Ok(())
}

/// `(sum_nodes w |v|^p)^{1/p}` over the region, `|v|` Euclidean for vectors.
pub fn lp_norm<F: Field + ?Sized>(field: &F, p: f64, region: &Region) -> Result<f64> {
    check_exponent(p)?;
    let weights = field.grid().region_weights(region)?;
    if weights.is_empty() {
        return Err(domain!("region does not meet the lattice"));
    }
    let zero = vec![0.0; field.components()];
    let sum: f64 = weights
        .iter()
        .map(|&(i, w)| w * field.distance_at(i, &zero).powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// All multi-indices of total order `<= k` in `n` variables, graded
/// (by order) and lexicographically descending within each order.
pub(crate) fn multi_indices_up_to(n: usize, k: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for order in 0..=k {
        let mut cur = vec![0u32; n];
        push_of_order(&mut out, &mut cur, 0, order);
    }
    out
}

fn push_of_order(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, axis: usize, left: u32) {
    if axis + 1 == cur.len() {
        cur[axis] = left;
        out.push(cur.clone());
        return;
    }
    for take in (0..=left).rev() {
        cur[axis] = take;
        push_of_order(out, cur, axis + 1, left - take);
    }
    cur[axis] = 0;
}

fn check_inset(f: &GridFunction, k: u32, region: &Region) -> Result<()> {
    if !region.inset_by(f.grid(), k as usize)? {
        return Err(domain!("region lies within {k} stencil layers of the lattice boundary"));
    }
    Ok(())
}

/// Sobolev norm `sum_{|alpha| <= k} ||d^alpha f||_{L_p(region)}` with nested
/// finite differences.
pub fn wkp_norm(f: &GridFunction, k: u32, p: f64, region: &Region) -> Result<f64> {
    check_exponent(p)?;
    check_inset(f, k, region)?;
    let mut total = 0.0;
    for alpha in multi_indices_up_to(f.grid().dim(), k) {
        total += lp_norm(&f.derivative(&alpha), p, region)?;
    }
    Ok(total)
}

/// The equivalent norm `||f||_{L_p} + sum_{|alpha| = k} ||d^alpha f||_{L_p}`.
pub fn wkp_top_norm(f: &GridFunction, k: u32, p: f64, region: &Region) -> Result<f64> {
    check_exponent(p)?;
    check_inset(f, k, region)?;
    let mut total = lp_norm(f, p, region)?;
    if k > 0 {
        for alpha in multi_indices_up_to(f.grid().dim(), k) {
            if alpha.iter().sum::<u32>() == k {
                total += lp_norm(&f.derivative(&alpha), p, region)?;
            }
        }
    }
    Ok(total)
}

/// Integrand of [`ball_average`].
#[derive(Debug, Clone, Copy)]
pub enum BallIntegrand<'a> {
    /// The field itself (componentwise for vector fields).
    Raw,
    /// `|v - center|^p`, Euclidean magnitude for vector fields.
    AbsDev {
        /// Reference value `c`.
        center: &'a [f64],
        /// Exponent, `>= 1`.
        p: f64,
    },
}

/// Weighted mean over precomputed quadrature weights.
pub(crate) fn weighted_mean<F: Field + ?Sized>(
    field: &F,
    weights: &[(usize, f64)],
    integrand: BallIntegrand<'_>,
) -> Vec<f64> {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    match integrand {
        BallIntegrand::Raw => (0..field.components())
            .map(|c| {
                let vals = field.component(c);
                weights.iter().map(|&(i, w)| w * vals[i]).sum::<f64>() / total
            })
            .collect(),
        BallIntegrand::AbsDev { center, p } => {
            let s: f64 = weights
                .iter()
                .map(|&(i, w)| w * field.distance_at(i, center).powf(p))
                .sum();
            vec![s / total]
        }
    }
}

/// Mean of the integrand over `B(x, r)`. Raw mode returns one entry per
/// component; deviation mode returns a single entry.
pub fn ball_average<F: Field + ?Sized>(
    field: &F,
    x: &[f64],
    r: f64,
    integrand: BallIntegrand<'_>,
) -> Result<Vec<f64>> {
    if let BallIntegrand::AbsDev { center, p } = integrand {
        check_exponent(p)?;
        check_dim(field.components(), center.len())?;
    }
    let weights = field.grid().ball_weights(x, r)?;
    Ok(weighted_mean(field, &weights, integrand))
}
