//! The standard mollifier `eta_eps` and lattice convolution `f * eta_eps`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::grid::{Field, Grid, GridFunction, Region, VectorField};
use crate::quadrature::simpson_converged;
use crate::special::unit_ball_volume;

/// Unnormalized bump `exp(1/(|x|^2 - 1))` as a function of `|x|^2`.
pub fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 / (r2 - 1.0)).exp()
    } else {
        0.0
    }
}

/// Normalizing constant `C` with `int_{B(0,1)} C exp(1/(|x|^2-1)) dx = 1` in
/// `R^n`, from the radial integral `n w_n int_0^1 bump(r^2) r^{n-1} dr`
/// refined until it settles to `1e-13`.
pub fn kernel_constant(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(domain!("mollifier dimension must be >= 1"));
    }
    let radial = simpson_converged(|r| bump(r * r) * r.powi(n as i32 - 1), 0.0, 1.0, 1e-13)?;
    let integral = n as f64 * unit_ball_volume(n as f64) * radial;
    if !(integral > 0.0) {
        return Err(Error::Numeric(alloc::format!("bump integral {integral} is not positive")));
    }
    Ok(1.0 / integral)
}

/// `eta_eps(x) = eps^{-n} C bump(|x/eps|^2)`.
pub fn eta_eps(x: &[f64], eps: f64, constant: f64) -> f64 {
    let r2 = x.iter().map(|v| v * v).sum::<f64>() / (eps * eps);
    constant * bump(r2) / eps.powi(x.len() as i32)
}

/// Lattice samples of `eta_eps` on the stencil `|k h| < eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    dim: usize,
    constant: f64,
    eps: f64,
    offsets: Vec<Vec<isize>>,
    weights: Vec<f64>,
    raw_mass: f64,
}

impl MollifierKernel {
    /// Builds the kernel for lattice spacing `spacing`. Needs
    /// `eps >= 2 max(spacing)` so the bump spans several nodes per axis.
    pub fn new(spacing: &[f64], eps: f64) -> Result<Self> {
        let n = spacing.len();
        let hmax = spacing.iter().fold(0.0f64, |a, &b| a.max(b));
        if !(eps > 0.0) || eps < 2.0 * hmax * (1.0 - 1e-12) {
            return Err(Error::Resolution(alloc::format!(
                "mollifier radius {eps:e} needs at least 2 grid spacings ({:e})",
                2.0 * hmax
            )));
        }
        let constant = kernel_constant(n)?;
        let reach: Vec<isize> = spacing.iter().map(|h| (eps / h).ceil() as isize).collect();
        let cell: f64 = spacing.iter().product();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut k: Vec<isize> = reach.iter().map(|r| -r).collect();
        let mut y = vec![0.0; n];
        'outer: loop {
            for d in 0..n {
                y[d] = k[d] as f64 * spacing[d];
            }
            let w = eta_eps(&y, eps, constant) * cell;
            if w > 0.0 {
                offsets.push(k.clone());
                weights.push(w);
            }
            let mut d = n;
            loop {
                if d == 0 {
                    break 'outer;
                }
                d -= 1;
                if k[d] < reach[d] {
                    k[d] += 1;
                    break;
                }
                k[d] = -reach[d];
            }
        }
        let raw_mass: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= raw_mass;
        }
        Ok(Self { dim: n, constant, eps, offsets, weights, raw_mass })
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Normalizing constant `C` of the continuum kernel.
    pub fn constant(&self) -> f64 {
        self.constant
    }
    /// Support radius.
    pub fn eps(&self) -> f64 {
        self.eps
    }
    /// Discrete integral `sum eta_eps(k h) h^n` before renormalization.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }
    /// Normalized stencil weights (sum to one, nonnegative).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Stencil offsets in lattice units, parallel to [`Self::weights`].
    pub fn offsets(&self) -> &[Vec<isize>] {
        &self.offsets
    }
}

/// `f * eta_eps` on the nodes of `Omega_eps`; other nodes are masked out.
#[derive(Debug, Clone)]
pub struct Mollified {
    /// Convolution values (zero at masked-out nodes).
    pub values: GridFunction,
    /// `true` on `Omega_eps`.
    pub defined: Vec<bool>,
    /// Kernel used.
    pub kernel: MollifierKernel,
}

impl Mollified {
    /// `Omega_eps` as a quadrature region.
    pub fn region(&self) -> Region {
        Region::NodeMask(self.defined.clone())
    }

    /// The values on `Omega_eps` as a field on its own (box-shaped) lattice.
    pub fn restricted(&self) -> Result<GridFunction> {
        let g = self.values.grid();
        let n = g.dim();
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0usize; n];
        let mut multi = vec![0; n];
        for (i, _) in self.defined.iter().enumerate().filter(|(_, d)| **d) {
            g.multi_index(i, &mut multi);
            for d in 0..n {
                lo[d] = lo[d].min(multi[d]);
                hi[d] = hi[d].max(multi[d]);
            }
        }
        let counts: Vec<usize> = (0..n).map(|d| hi[d] + 1 - lo[d]).collect();
        let lower: Vec<f64> = (0..n).map(|d| g.coord(d, lo[d])).collect();
        let upper: Vec<f64> = (0..n).map(|d| g.coord(d, hi[d])).collect();
        let sub = Arc::new(Grid::new(&lower, &upper, &counts)?);
        let mut values = Vec::with_capacity(sub.len());
        for j in 0..sub.len() {
            sub.multi_index(j, &mut multi);
            for d in 0..n {
                multi[d] += lo[d];
            }
            values.push(self.values.values()[g.linear_index(&multi)]);
        }
        GridFunction::new(sub, values)
    }
}

/// Nodes whose distance to the lattice box boundary exceeds `eps`.
pub fn interior_mask(grid: &Grid, eps: f64) -> Vec<bool> {
    let mut y = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|i| {
            grid.node_coords(i, &mut y);
            (0..grid.dim()).all(|d| y[d] - grid.lower()[d] > eps && grid.upper()[d] - y[d] > eps)
        })
        .collect()
}

/// Convolution of `f` with the renormalized lattice kernel on `Omega_eps`.
pub fn mollify(f: &GridFunction, eps: f64) -> Result<Mollified> {
    let g = f.grid();
    let kernel = MollifierKernel::new(g.spacing(), eps)?;
    let defined = interior_mask(g, eps);
    if !defined.iter().any(|d| *d) {
        return Err(domain!("Omega_eps is empty: eps = {eps} reaches across the domain"));
    }
    let linear: Vec<isize> = kernel
        .offsets
        .iter()
        .map(|k| k.iter().zip(g.strides()).map(|(o, s)| o * *s as isize).sum())
        .collect();
    let src = f.values();
    let values: Vec<f64> = defined
        .iter()
        .enumerate()
        .map(|(i, &inside)| {
            if !inside {
                return 0.0;
            }
            linear
                .iter()
                .zip(&kernel.weights)
                .map(|(off, w)| w * src[(i as isize + off) as usize])
                .sum()
        })
        .collect();
    let values = GridFunction::new(f.grid_arc().clone(), values)?;
    Ok(Mollified { values, defined, kernel })
}

/// Componentwise [`mollify`] of a vector field; returns the smoothed field
/// (zero outside `Omega_eps`) and the `Omega_eps` mask.
pub fn mollify_vector(field: &VectorField, eps: f64) -> Result<(VectorField, Vec<bool>)> {
    let mut comps = Vec::with_capacity(field.components());
    let mut mask = Vec::new();
    for c in 0..field.components() {
        let m = mollify(&field.scalar(c), eps)?;
        mask = m.defined;
        comps.push(m.values.values().to_vec());
    }
    Ok((VectorField::new(Arc::new(field.grid().clone()), comps)?, mask))
}
