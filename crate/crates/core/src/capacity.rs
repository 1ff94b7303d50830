//! Variational `p`-capacity of condensers `(K, Omega)` on a lattice, and the
//! null / positive dichotomy under grid refinement.
//!
//! The discrete energy lives on lattice cells. Each cell is split into `2^n`
//! corner pieces; the piece at corner `b` uses the edge differences through
//! `b` along every axis as its gradient and carries `1/2^n` of the cell
//! volume. A plain average of forward differences per cell would leave the
//! checkerboard pattern with zero energy; the corner split does not.

use alloc::vec;
use alloc::vec::Vec;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::grid::{Grid, GridFunction, Region};
use crate::linalg::fit_line;

/// Compact sets that can be laid down on a lattice as a node set.
pub trait CondenserSet {
    /// Nodes of `grid` that belong to the (closed) set.
    fn condenser_mask(&self, grid: &Grid) -> Result<Vec<bool>>;
}

impl CondenserSet for Region {
    /// Closed version of the region: boundary nodes of balls are included.
    fn condenser_mask(&self, grid: &Grid) -> Result<Vec<bool>> {
        match self {
            Region::Ball { center, radius } => {
                if center.len() != grid.dim() {
                    return Err(domain!("ball centre has {} coordinates, grid has {}", center.len(), grid.dim()));
                }
                let r2 = radius * radius * (1.0 + 1e-12);
                let mut y = vec![0.0; grid.dim()];
                Ok((0..grid.len())
                    .map(|i| {
                        grid.node_coords(i, &mut y);
                        center.iter().zip(&y).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() <= r2
                    })
                    .collect())
            }
            _ => self.node_mask(grid),
        }
    }
}

/// A condenser `(K, Omega)` on a lattice with exponent `p` and smoothing `delta`.
#[derive(Debug, Clone)]
pub struct CondenserProblem {
    grid: Grid,
    k: Vec<bool>,
    omega: Vec<bool>,
    p: f64,
    delta: f64,
}

impl CondenserProblem {
    /// Validates the masks. `K` may be empty; otherwise every `K` node and its
    /// full `3^n` neighbourhood must lie in `Omega` (and inside the lattice).
    /// The smoothing defaults to the largest spacing for `p < 2` and 0 above.
    pub fn new(grid: Grid, k: Vec<bool>, omega: Vec<bool>, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(domain!("capacity exponent must be finite and >= 1, got {p}"));
        }
        if k.len() != grid.len() || omega.len() != grid.len() {
            return Err(domain!(
                "mask sizes {} / {} do not match the grid ({})",
                k.len(),
                omega.len(),
                grid.len()
            ));
        }
        if !omega.iter().any(|o| *o) {
            return Err(domain!("Omega has no nodes"));
        }
        let n = grid.dim();
        let mut multi = vec![0usize; n];
        let mut nb = vec![0usize; n];
        for i in (0..grid.len()).filter(|&i| k[i]) {
            grid.multi_index(i, &mut multi);
            if (0..n).any(|d| multi[d] == 0 || multi[d] + 1 == grid.counts()[d]) {
                return Err(domain!("K touches the lattice boundary at node {i}"));
            }
            for code in 0..3usize.pow(n as u32) {
                let mut c = code;
                for d in 0..n {
                    nb[d] = multi[d] + c % 3 - 1;
                    c /= 3;
                }
                if !omega[grid.linear_index(&nb)] {
                    return Err(domain!("K node {i} is adjacent to the complement of Omega"));
                }
            }
        }
        let delta = if p < 2.0 { grid.max_spacing() } else { 0.0 };
        Ok(Self { grid, k, omega, p, delta })
    }

    /// Builds the masks from a compact set and a domain region.
    pub fn from_sets<S: CondenserSet + ?Sized>(grid: Grid, k: &S, omega: &Region, p: f64) -> Result<Self> {
        let km = k.condenser_mask(&grid)?;
        let om = omega.node_mask(&grid)?;
        Self::new(grid, km, om, p)
    }

    /// Overrides the smoothing parameter.
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(domain!("smoothing must be finite and >= 0, got {delta}"));
        }
        self.delta = delta;
        Ok(self)
    }

    /// Lattice.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    /// Compact set nodes.
    pub fn k_mask(&self) -> &[bool] {
        &self.k
    }
    /// Domain nodes.
    pub fn omega_mask(&self) -> &[bool] {
        &self.omega
    }
    /// Exponent.
    pub fn p(&self) -> f64 {
        self.p
    }
    /// Smoothing used during optimization.
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityOptions {
    /// Stop when `max |P(u - grad/vol) - u|` over free nodes drops below this.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Window of the nonmonotone line search.
    pub memory: usize,
    /// Start from the solution on the lattice with every other node removed,
    /// recursively, when the lattice allows it.
    pub multilevel: bool,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 100_000, memory: 10, multilevel: true }
    }
}

/// Minimizer and diagnostics of a capacity solve.
#[derive(Debug, Clone)]
pub struct CapacityEstimate {
    /// Unsmoothed energy of `u`.
    pub energy: f64,
    /// Admissible minimizer (or best iterate on failure).
    pub u: GridFunction,
    /// Optimizer iterations taken.
    pub iterations: usize,
    /// Final projected-gradient norm.
    pub projected_gradient: f64,
    /// `(h, energy)` per refinement level; a single entry for one solve.
    pub history: Vec<(f64, f64)>,
}

/// Cell-corner energy assembly for one problem.
struct Energy<'a> {
    prob: &'a CondenserProblem,
    cells: Vec<usize>,
    corners: Vec<usize>,
    inv_h: Vec<f64>,
    weight: f64,
    exponent: Exponent,
}

/// Cheap paths for the common exponents.
#[derive(Clone, Copy)]
enum Exponent {
    One,
    Two,
    General,
}

impl<'a> Energy<'a> {
    fn new(prob: &'a CondenserProblem, free: &[bool]) -> Self {
        let g = &prob.grid;
        let n = g.dim();
        let corners: Vec<usize> = (0..1usize << n)
            .map(|b| (0..n).filter(|d| b >> d & 1 == 1).map(|d| g.strides()[d]).sum())
            .collect();
        let mut multi = vec![0usize; n];
        let cells = (0..g.len())
            .filter(|&i| {
                g.multi_index(i, &mut multi);
                (0..n).all(|d| multi[d] + 1 < g.counts()[d]) && corners.iter().any(|o| free[i + o])
            })
            .collect();
        let inv_h = g.spacing().iter().map(|h| 1.0 / h).collect();
        let weight = g.cell_volume() / corners.len() as f64;
        let exponent = if prob.p == 2.0 {
            Exponent::Two
        } else if prob.p == 1.0 {
            Exponent::One
        } else {
            Exponent::General
        };
        Self { prob, cells, corners, inv_h, weight, exponent }
    }

    /// Energy with smoothing `delta`; accumulates the gradient when asked.
    fn eval(&self, u: &[f64], delta: f64, mut grad: Option<&mut [f64]>) -> f64 {
        let n = self.inv_h.len();
        let p = self.prob.p;
        let d2 = delta * delta;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut gvec = [0.0f64; 8];
        let mut total = 0.0;
        for &base in &self.cells {
            for b in 0..self.corners.len() {
                let mut s = 0.0;
                for d in 0..n {
                    let hi = base + self.corners[b | 1 << d];
                    let lo = base + self.corners[b & !(1 << d)];
                    gvec[d] = (u[hi] - u[lo]) * self.inv_h[d];
                    s += gvec[d] * gvec[d];
                }
                let q = s + d2;
                let (phi, dphi) = match self.exponent {
                    Exponent::Two => (q, 1.0),
                    Exponent::One => {
                        let r = q.sqrt();
                        (r, if r > 0.0 { 0.5 / r } else { 0.0 })
                    }
                    Exponent::General if q > 0.0 => {
                        let t = q.powf(0.5 * p - 1.0);
                        (t * q, 0.5 * p * t)
                    }
                    // Flat piece: q^(p/2 - 1) may be infinite, the value is 0.
                    Exponent::General => (0.0, 0.0),
                };
                total += self.weight * phi;
                if let Some(g) = grad.as_deref_mut() {
                    if dphi == 0.0 {
                        continue;
                    }
                    let scale = 2.0 * self.weight * dphi;
                    for d in 0..n {
                        let c = scale * gvec[d] * self.inv_h[d];
                        g[base + self.corners[b | 1 << d]] += c;
                        g[base + self.corners[b & !(1 << d)]] -= c;
                    }
                }
            }
        }
        total
    }
}

fn project(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Minimizes the discrete `p`-energy over `u` in `[0, 1]` with `u = 1` on `K`
/// and `u = 0` off `Omega`, by spectral projected gradient (Barzilai-Borwein
/// steps with a nonmonotone Armijo search). The reported energy is the
/// unsmoothed energy at the minimizer.
pub fn p_capacity(prob: &CondenserProblem, opts: &CapacityOptions) -> Result<CapacityEstimate> {
    if prob.grid.dim() > 3 {
        return Err(domain!("capacity solver supports up to 3 dimensions"));
    }
    let grid = alloc::sync::Arc::new(prob.grid.clone());
    let h = prob.grid.max_spacing();
    let len = prob.grid.len();
    let u0: Vec<f64> = prob.k.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    if !prob.k.iter().any(|k| *k) {
        return Ok(CapacityEstimate {
            energy: 0.0,
            u: GridFunction::new(grid, u0)?,
            iterations: 0,
            projected_gradient: 0.0,
            history: vec![(h, 0.0)],
        });
    }
    let free: Vec<bool> = (0..len).map(|i| prob.omega[i] && !prob.k[i]).collect();
    let energy = Energy::new(prob, &free);
    let vol = prob.grid.cell_volume();
    let delta = prob.delta;

    let mut u = u0;
    if opts.multilevel {
        if let Some(coarse) = coarsen(prob) {
            let coarse_opts = CapacityOptions { tol: opts.tol * 10.0, ..*opts };
            let coarse_u = match p_capacity(&coarse, &coarse_opts) {
                Ok(est) => Some(est.u),
                Err(Error::CapacityNotConverged(est)) => Some(est.u),
                Err(_) => None,
            };
            if let Some(cu) = coarse_u {
                let warm = prolong(&prob.grid, cu.values());
                for i in 0..len {
                    if free[i] {
                        u[i] = project(warm[i]);
                    }
                }
            }
        }
    }
    let mut g = vec![0.0; len];
    let mut e = energy.eval(&u, delta, Some(&mut g));
    let mask_grad = |g: &mut [f64]| {
        for (gi, f) in g.iter_mut().zip(&free) {
            if !f {
                *gi = 0.0;
            }
        }
    };
    mask_grad(&mut g);
    let pg_norm = |u: &[f64], g: &[f64]| {
        (0..len)
            .filter(|&i| free[i])
            .map(|i| (project(u[i] - g[i] / vol) - u[i]).abs())
            .fold(0.0f64, f64::max)
    };
    let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let (alpha_min, alpha_max) = (1e-10 * vol, 1e10 * vol);
    let mut alpha = if gmax > 0.0 { (1.0 / gmax).clamp(alpha_min, alpha_max) } else { vol };
    let mut recent = vec![e];
    let mut best = (e, u.clone());
    let mut pg = pg_norm(&u, &g);
    let mut iterations = 0;
    let mut u_new = vec![0.0; len];
    let mut g_new = vec![0.0; len];
    let mut dir = vec![0.0; len];
    while pg >= opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let mut slope = 0.0;
        for i in 0..len {
            dir[i] = if free[i] { project(u[i] - alpha * g[i]) - u[i] } else { 0.0 };
            slope += g[i] * dir[i];
        }
        let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let e_new = loop {
            for i in 0..len {
                u_new[i] = u[i] + lambda * dir[i];
            }
            let trial = energy.eval(&u_new, delta, Some(&mut g_new));
            if trial <= reference + 1e-4 * lambda * slope || lambda < 1e-12 {
                break trial;
            }
            lambda *= 0.5;
        };
        mask_grad(&mut g_new);
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..len {
            let s = u_new[i] - u[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(alpha_min, alpha_max) } else { alpha_max };
        core::mem::swap(&mut u, &mut u_new);
        core::mem::swap(&mut g, &mut g_new);
        e = e_new;
        if e < best.0 {
            best = (e, u.clone());
        }
        recent.push(e);
        if recent.len() > opts.memory.max(1) {
            recent.remove(0);
        }
        pg = pg_norm(&u, &g);
        if ss == 0.0 && lambda < 1e-12 {
            break;
        }
    }
    let converged = pg < opts.tol;
    let u_final = if converged { u } else { best.1 };
    let reported = energy.eval(&u_final, 0.0, None);
    let estimate = CapacityEstimate {
        energy: reported,
        u: GridFunction::new(grid, u_final)?,
        iterations,
        projected_gradient: pg,
        history: vec![(h, reported)],
    };
    if converged {
        Ok(estimate)
    } else {
        Err(Error::CapacityNotConverged(alloc::boxed::Box::new(estimate)))
    }
}

/// Smallest node count per axis worth solving on as a warm start.
const COARSEST_NODES: usize = 17;

/// Same condenser on the lattice of even-indexed nodes, if that lattice is
/// large enough and the coarse masks are still feasible.
fn coarsen(prob: &CondenserProblem) -> Option<CondenserProblem> {
    let g = &prob.grid;
    if g.counts().iter().any(|&c| c % 2 == 0 || (c - 1) / 2 + 1 < COARSEST_NODES) {
        return None;
    }
    let counts: Vec<usize> = g.counts().iter().map(|c| (c - 1) / 2 + 1).collect();
    let coarse = Grid::new(g.lower(), g.upper(), &counts).ok()?;
    let n = g.dim();
    let mut multi = vec![0usize; n];
    let mut k = Vec::with_capacity(coarse.len());
    let mut omega = Vec::with_capacity(coarse.len());
    for j in 0..coarse.len() {
        coarse.multi_index(j, &mut multi);
        multi.iter_mut().for_each(|m| *m *= 2);
        let i = g.linear_index(&multi);
        k.push(prob.k[i]);
        omega.push(prob.omega[i]);
    }
    if !k.iter().any(|v| *v) {
        return None;
    }
    let mut c = CondenserProblem::new(coarse, k, omega, prob.p).ok()?;
    if prob.p < 2.0 {
        c.delta = c.grid.max_spacing();
    }
    Some(c)
}

/// Multilinear interpolation from the even-node sublattice of `fine`.
fn prolong(fine: &Grid, coarse: &[f64]) -> Vec<f64> {
    let n = fine.dim();
    let ccounts: Vec<usize> = fine.counts().iter().map(|c| (c - 1) / 2 + 1).collect();
    let mut cstrides = vec![1usize; n];
    for d in (0..n.saturating_sub(1)).rev() {
        cstrides[d] = cstrides[d + 1] * ccounts[d + 1];
    }
    let mut multi = vec![0usize; n];
    (0..fine.len())
        .map(|i| {
            fine.multi_index(i, &mut multi);
            let mut acc = 0.0;
            for b in 0..1usize << n {
                let mut idx = 0;
                let mut w = 1.0;
                for d in 0..n {
                    let m = multi[d];
                    if m.is_multiple_of(2) {
                        if b >> d & 1 == 1 {
                            w = 0.0;
                            break;
                        }
                        idx += m / 2 * cstrides[d];
                    } else {
                        idx += (m / 2 + (b >> d & 1)) * cstrides[d];
                        w *= 0.5;
                    }
                }
                if w > 0.0 {
                    acc += w * coarse[idx];
                }
            }
            acc
        })
        .collect()
}

/// Nested lattices on a fixed box: level `l` has `(coarse_nodes - 1) 2^l + 1`
/// nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    /// Lower corner of the box.
    pub lower: Vec<f64>,
    /// Upper corner of the box.
    pub upper: Vec<f64>,
    /// Nodes per axis on the coarsest level.
    pub coarse_nodes: usize,
    /// Number of levels.
    pub levels: usize,
}

impl Refinement {
    /// Lattice of level `l`.
    pub fn grid(&self, level: usize) -> Result<Grid> {
        let count = (self.coarse_nodes - 1) * (1 << level) + 1;
        Grid::new(&self.lower, &self.upper, &vec![count; self.lower.len()])
    }
}

/// Outcome of the refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullVerdict {
    /// Energies fall off with refinement.
    NullSuggested,
    /// Energies settle to a positive value.
    PositiveSuggested,
    /// Neither pattern is clear.
    Inconclusive,
}

impl NullVerdict {
    /// Stable name used in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            NullVerdict::NullSuggested => "NullSuggested",
            NullVerdict::PositiveSuggested => "PositiveSuggested",
            NullVerdict::Inconclusive => "Inconclusive",
        }
    }
}

impl core::fmt::Display for NullVerdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEstimate {
    /// Largest spacing.
    pub h: f64,
    /// Unsmoothed energy.
    pub energy: f64,
    /// Optimizer iterations.
    pub iterations: usize,
    /// Lattice volume of the `K` nodes.
    pub k_volume: f64,
}

/// Per-level estimates, fitted slope of `log E` vs `log(1/h)`, and verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct NullClassification {
    /// Levels from coarse to fine.
    pub levels: Vec<LevelEstimate>,
    /// Least-squares slope of `log E` against `log(1/h)`.
    pub slope: f64,
    /// Verdict.
    pub verdict: NullVerdict,
}

/// Fitted slope below which decreasing energies count as null.
pub const NULL_SLOPE: f64 = -0.2;
/// Relative agreement of the last two levels for a positive verdict.
pub const POSITIVE_BAND: f64 = 0.1;

/// Runs [`p_capacity`] for `K = set` in the fixed domain `omega` on every
/// level of `refinement` and classifies the trend.
pub fn cap_null_classify<S: CondenserSet + ?Sized>(
    set: &S,
    omega: &Region,
    p: f64,
    refinement: &Refinement,
    opts: &CapacityOptions,
) -> Result<NullClassification> {
    if refinement.levels < 2 {
        return Err(domain!("null classification needs at least 2 levels"));
    }
    let mut levels = Vec::with_capacity(refinement.levels);
    for l in 0..refinement.levels {
        let grid = refinement.grid(l)?;
        let prob = CondenserProblem::from_sets(grid, set, omega, p)?;
        if !prob.k_mask().iter().any(|k| *k) {
            return Err(domain!("the set has no nodes on level {l}"));
        }
        let k_volume = (0..prob.grid.len()).filter(|&i| prob.k[i]).map(|i| prob.grid.node_volume(i)).sum();
        let est = p_capacity(&prob, opts)?;
        levels.push(LevelEstimate { h: prob.grid.max_spacing(), energy: est.energy, iterations: est.iterations, k_volume });
    }
    let xs: Vec<f64> = levels.iter().map(|l| -l.h.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.energy.max(1e-300).ln()).collect();
    let slope = fit_line(&xs, &ys).map(|(s, _)| s).unwrap_or(0.0);
    let first = levels[0].energy;
    let last = levels[levels.len() - 1].energy;
    let prev = levels[levels.len() - 2].energy;
    let verdict = if slope < NULL_SLOPE && last < first {
        NullVerdict::NullSuggested
    } else if last > 0.0 && (last - prev).abs() <= POSITIVE_BAND * last.max(prev) {
        NullVerdict::PositiveSuggested
    } else {
        NullVerdict::Inconclusive
    };
    Ok(NullClassification { levels, slope, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;

    fn interval_problem(nodes: usize, p: f64) -> CondenserProblem {
        let g = Grid::cube(1, -1.0, 1.0, nodes).unwrap();
        let omega = Region::ball(&[0.0], 1.0).unwrap();
        let mut k = vec![false; g.len()];
        k[g.nearest_node(&[0.0])] = true;
        CondenserProblem::new(g.clone(), k, omega.node_mask(&g).unwrap(), p).unwrap()
    }

    #[test]
    fn fractional_exponents_report_finite_energy() {
        for p in [1.25, 1.5, 1.75] {
            let est = p_capacity(&interval_problem(33, p), &CapacityOptions::default()).unwrap();
            // The tent is optimal for every p in 1D: energy 2.
            assert!((est.energy - 2.0).abs() < 1e-3, "p={p}: {}", est.energy);
        }
    }

    #[test]
    fn empty_compact_set_has_zero_capacity() {
        let g = Grid::cube(2, -1.0, 1.0, 9).unwrap();
        let omega = Region::ball(&[0.0, 0.0], 1.0).unwrap().node_mask(&g).unwrap();
        let prob = CondenserProblem::new(g.clone(), vec![false; g.len()], omega, 2.0).unwrap();
        let est = p_capacity(&prob, &CapacityOptions::default()).unwrap();
        assert_eq!(est.energy, 0.0);
        assert!(est.u.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tent_function_in_one_dimension() {
        let est = p_capacity(&interval_problem(65, 2.0), &CapacityOptions::default()).unwrap();
        // Oracle: u = 1 - |z| has energy exactly 2 and is piecewise linear.
        assert!((est.energy - 2.0).abs() < 1e-8, "energy {}", est.energy);
        let g = est.u.grid();
        for i in 0..g.len() {
            let z = g.coord(0, i);
            assert!((est.u.values()[i] - (1.0 - z.abs())).abs() < 1e-6);
        }
    }

    #[test]
    fn one_dimensional_p_scaling() {
        // Two linear pieces of slope 1: energy 2 for every p.
        let est = p_capacity(&interval_problem(33, 3.0), &CapacityOptions::default()).unwrap();
        assert!((est.energy - 2.0).abs() < 1e-6, "energy {}", est.energy);
    }

    #[test]
    fn admissibility_of_minimizer() {
        let g = Grid::cube(2, -1.0, 1.0, 33).unwrap();
        let k = Region::ball(&[0.0, 0.0], 0.3).unwrap();
        let omega = Region::ball(&[0.0, 0.0], 1.0).unwrap();
        let prob = CondenserProblem::from_sets(g, &k, &omega, 2.0).unwrap();
        let est = p_capacity(&prob, &CapacityOptions::default()).unwrap();
        for (i, v) in est.u.values().iter().enumerate() {
            assert!((0.0..=1.0).contains(v));
            if prob.k_mask()[i] {
                assert_eq!(*v, 1.0);
            }
            if !prob.omega_mask()[i] {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn infeasible_masks_are_rejected() {
        let g = Grid::cube(1, -1.0, 1.0, 9).unwrap();
        let omega = Region::ball(&[0.0], 1.0).unwrap().node_mask(&g).unwrap();
        let mut k = vec![false; g.len()];
        k[1] = true;
        assert!(matches!(CondenserProblem::new(g.clone(), k, omega.clone(), 2.0), Err(Error::Domain(_))));
        assert!(CondenserProblem::new(g.clone(), vec![false; 9], vec![false; 9], 2.0).is_err());
        assert!(CondenserProblem::new(g, vec![false; 9], omega, 0.5).is_err());
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let opts = CapacityOptions { tol: 1e-14, max_iter: 3, memory: 10, multilevel: false };
        match p_capacity(&interval_problem(129, 2.0), &opts) {
            Err(Error::CapacityNotConverged(est)) => {
                assert_eq!(est.iterations, 3);
                assert!(est.energy.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn checkerboard_has_energy() {
        let g = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        let omega = vec![true; g.len()];
        let prob = CondenserProblem::new(g.clone(), vec![false; g.len()], omega.clone(), 2.0).unwrap();
        let free = vec![true; g.len()];
        let energy = Energy::new(&prob, &free);
        let mut multi = [0usize; 2];
        let u: Vec<f64> = (0..g.len())
            .map(|i| {
                g.multi_index(i, &mut multi);
                ((multi[0] + multi[1]) % 2) as f64
            })
            .collect();
        assert!(energy.eval(&u, 0.0, None) > 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Grid::cube(2, -1.0, 1.0, 7).unwrap();
        let omega = vec![true; g.len()];
        let prob = CondenserProblem::new(g.clone(), vec![false; g.len()], omega, 1.5).unwrap();
        let free = vec![true; g.len()];
        let energy = Energy::new(&prob, &free);
        let u: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 11) as f64) / 11.0).collect();
        let mut grad = vec![0.0; g.len()];
        energy.eval(&u, 0.1, Some(&mut grad));
        for i in [0, 8, 24, 40] {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (energy.eval(&up, 0.1, None) - energy.eval(&dn, 0.1, None)) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()), "node {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn point_on_the_line_is_positive_for_p2() {
        let refinement = Refinement { lower: vec![-1.0], upper: vec![1.0], coarse_nodes: 17, levels: 4 };
        let point = Region::cuboid(&[0.0], &[0.0]).unwrap();
        let omega = Region::ball(&[0.0], 1.0).unwrap();
        let r = cap_null_classify(&point, &omega, 2.0, &refinement, &CapacityOptions::default()).unwrap();
        assert_eq!(r.verdict, NullVerdict::PositiveSuggested);
        assert!(r.levels.iter().all(|l| (l.energy - 2.0).abs() < 1e-6));
    }
}
