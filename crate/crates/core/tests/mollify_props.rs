//! Normalization, Young's inequality, commutation with differences and
//! convergence at `L_p`-points for the lattice mollifier.

use std::sync::Arc;

use sobolev_lab_core::corpus;
use sobolev_lab_core::grid::{gradient_fd, lp_norm};
use sobolev_lab_core::mollify::{eta_eps, kernel_constant, mollify, mollify_vector, MollifierKernel};
use sobolev_lab_core::representative::{classify_lp_point, RepresentativeOptions};
use sobolev_lab_core::{Field, Grid, GridFunction, PointVerdict, RadiusSchedule, Region};

/// Cartesian midpoint rule for `int eta_eps` over `[-eps, eps]^n`.
fn midpoint_mass(n: usize, eps: f64, cells: usize) -> f64 {
    let c = kernel_constant(n).unwrap();
    let h = 2.0 * eps / cells as f64;
    let mut idx = vec![0usize; n];
    let mut y = vec![0.0; n];
    let mut total = 0.0;
    loop {
        for d in 0..n {
            y[d] = -eps + (idx[d] as f64 + 0.5) * h;
        }
        total += eta_eps(&y, eps, c);
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < cells {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                return total * h.powi(n as i32);
            }
        }
    }
}

#[test]
fn mollifier_has_unit_mass() {
    for (n, cells) in [(1, 100_000), (2, 1500), (3, 200)] {
        for eps in [0.05, 0.5, 2.0] {
            let mass = midpoint_mass(n, eps, cells);
            assert!((mass - 1.0).abs() < 1e-6, "n={n} eps={eps}: {mass}");
        }
    }
}

fn corpus_samples() -> Vec<(&'static str, GridFunction)> {
    let line = Arc::new(Grid::cube(1, -1.5, 1.5, 601).unwrap());
    let plane = Arc::new(Grid::cube(2, -1.5, 1.5, 121).unwrap());
    corpus::entries()
        .iter()
        .map(|e| {
            let g = if e.dims.supports(2) { plane.clone() } else { line.clone() };
            (e.id, e.sample(g).unwrap())
        })
        .collect()
}

#[test]
fn young_bound_across_corpus() {
    for (id, f) in corpus_samples() {
        let omega = Region::NodeMask(vec![true; f.grid().len()]);
        for eps in [0.1, 0.3] {
            let m = mollify(&f, eps).unwrap();
            for p in [1.0, 2.0, 4.0] {
                let lhs = lp_norm(&m.values, p, &m.region()).unwrap();
                let rhs = lp_norm(&f, p, &omega).unwrap();
                assert!(lhs <= rhs + 1e-8, "{id} eps={eps} p={p}: {lhs} > {rhs}");
            }
        }
    }
}

#[test]
fn mollify_commutes_with_differences() {
    // Central differences and lattice convolution are both translation
    // invariant, so away from the one-sided boundary rows they commute up to
    // rounding. Compare on nodes whose difference stencil stays in Omega_eps.
    for (id, f) in corpus_samples() {
        let eps = 0.2;
        let m = mollify(&f, eps).unwrap();
        let lhs = gradient_fd(&m.values);
        let (rhs, mask) = mollify_vector(&gradient_fd(&f), eps).unwrap();
        let g = f.grid();
        let mut worst = 0.0f64;
        for i in 0..g.len() {
            let deep = mask[i]
                && g.strides().iter().all(|&s| i >= s && i + s < g.len() && mask[i - s] && mask[i + s]);
            if !deep {
                continue;
            }
            for d in 0..g.dim() {
                worst = worst.max((lhs.component(d)[i] - rhs.component(d)[i]).abs());
            }
        }
        assert!(worst < 1e-10, "{id}: {worst}");
    }
}

/// `(f * eta_eps)` at one node, straight from the kernel stencil.
fn mollified_at(f: &GridFunction, node: usize, eps: f64) -> f64 {
    let g = f.grid();
    let kernel = MollifierKernel::new(g.spacing(), eps).unwrap();
    let mut multi = vec![0usize; g.dim()];
    g.multi_index(node, &mut multi);
    kernel
        .offsets()
        .iter()
        .zip(kernel.weights())
        .map(|(k, w)| {
            let shifted: Vec<usize> = multi.iter().zip(k).map(|(m, o)| (*m as isize + o) as usize).collect();
            w * f.values()[g.linear_index(&shifted)]
        })
        .sum()
}

#[test]
fn mollified_values_converge_at_lp_points() {
    let plane = Arc::new(Grid::cube(2, -1.0, 1.0, 801).unwrap());
    let sched = RadiusSchedule::new(0.004, 0.5, 4).unwrap();
    let opts = RepresentativeOptions::default();
    let points = [[0.0, 0.0], [0.3, -0.2], [-0.45, 0.1]];
    for id in ["gauss", "abs_nd", "cubic_kink", "bump", "poly_3"] {
        let f = corpus::sample(id, plane.clone()).unwrap();
        for x in &points {
            let patch = Arc::new(Grid::centered(x, 0.005, 0.0001).unwrap());
            let local = corpus::sample(id, patch).unwrap();
            let class = classify_lp_point(&local, x, 1.0, &sched, &opts).unwrap();
            assert_eq!(class.verdict, PointVerdict::LpPoint, "{id} at {x:?}");
            let node = plane.nearest_node(x);
            let gaps: Vec<f64> = [0.16, 0.08, 0.04, 0.02]
                .iter()
                .map(|&eps| (mollified_at(&f, node, eps) - class.estimate[0]).abs())
                .collect();
            assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{id} at {x:?}: {gaps:?}");
            assert!(*gaps.last().unwrap() < 1e-2, "{id} at {x:?}: {gaps:?}");
        }
    }
}
