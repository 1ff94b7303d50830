//! Norm, Jensen and finite-difference properties of the lattice layer.

use std::sync::Arc;

use proptest::prelude::*;
use sobolev_lab_core::corpus;
use sobolev_lab_core::grid::{ball_average, gradient_fd, lp_norm, BallIntegrand};
use sobolev_lab_core::{Field, Grid, GridFunction, Region};

fn square(nodes: usize) -> Arc<Grid> {
    Arc::new(Grid::cube(2, -1.0, 1.0, nodes).unwrap())
}

fn trig(g: &Arc<Grid>, a: f64, b: f64, c: f64) -> GridFunction {
    GridFunction::from_fn(g.clone(), |y| a * (3.0 * y[0]).sin() + b * y[1] * y[1] - c * (y[0] * y[1]).cos()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lp_norm_is_homogeneous(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -5.0..5.0f64, p in 1.0..6.0f64) {
        let g = square(41);
        let f = trig(&g, a, b, 1.0);
        let omega = Region::ball(&[0.1, -0.2], 0.7).unwrap();
        let lhs = lp_norm(&f.scale(c).unwrap(), p, &omega).unwrap();
        let rhs = c.abs() * lp_norm(&f, p, &omega).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn lp_norm_triangle_inequality(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, d in -2.0..2.0f64, p in 1.0..6.0f64) {
        let g = square(41);
        let f = trig(&g, a, b, 1.0);
        let h = trig(&g, c, d, -0.5);
        let omega = Region::cuboid(&[-0.9, -0.5], &[0.6, 0.9]).unwrap();
        let sum = lp_norm(&f.add(&h).unwrap(), p, &omega).unwrap();
        let bound = lp_norm(&f, p, &omega).unwrap() + lp_norm(&h, p, &omega).unwrap();
        prop_assert!(sum <= bound * (1.0 + 1e-10));
    }

    #[test]
    fn jensen_between_exponents(
        x0 in -0.4..0.4f64, x1 in -0.4..0.4f64, r in 0.1..0.5f64,
        c in -1.0..1.0f64, q in 1.0..4.0f64, extra in 0.0..4.0f64, idx in 0usize..4,
    ) {
        let ids = ["gauss", "abs_nd", "cubic_kink", "poly_3"];
        let f = corpus::sample(ids[idx], square(81)).unwrap();
        let p = q + extra;
        let center = [c];
        let lo = ball_average(&f, &[x0, x1], r, BallIntegrand::AbsDev { center: &center, p: q }).unwrap()[0];
        let hi = ball_average(&f, &[x0, x1], r, BallIntegrand::AbsDev { center: &center, p }).unwrap()[0];
        prop_assert!(lo <= hi.powf(q / p) + 1e-10, "{lo} vs {hi}^{}", q / p);
    }
}

/// Max gradient error over interior nodes `|y|_inf <= 0.5` for a 2D grid
/// of spacing `h` on `[-1, 1]^2`.
fn gradient_error(entry: &corpus::CorpusEntry, nodes: usize) -> f64 {
    let g = square(nodes);
    let f = entry.sample(g.clone()).unwrap();
    let fd = gradient_fd(&f);
    let grad = entry.gradient.unwrap();
    let mut exact = [0.0; 2];
    let mut y = [0.0; 2];
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        g.node_coords(i, &mut y);
        // Stay away from the kinks at the origin and the bump's edge.
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if y[0].abs().max(y[1].abs()) > 0.5 || r < 0.2 {
            continue;
        }
        grad(&y, &mut exact);
        for d in 0..2 {
            worst = worst.max((fd.component(d)[i] - exact[d]).abs());
        }
    }
    worst
}

#[test]
fn gradient_fd_is_second_order_on_smooth_corpus() {
    for entry in corpus::entries().iter().filter(|e| e.dims.supports(2) && e.gradient.is_some()) {
        let coarse = gradient_error(entry, 81);
        let fine = gradient_error(entry, 161);
        if coarse < 1e-11 {
            // Polynomials of degree <= 2 are differentiated exactly.
            assert!(fine < 1e-10, "{}: {fine}", entry.id);
            continue;
        }
        assert!(coarse / fine >= 3.5, "{}: {coarse} -> {fine}", entry.id);
    }
}
