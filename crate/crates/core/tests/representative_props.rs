//! Linearity, product and Leibniz rules, downward closure in `p` and the
//! commutation of representatives with differences.

use std::sync::Arc;

use proptest::prelude::*;
use sobolev_lab_core::corpus;
use sobolev_lab_core::grid::gradient_fd;
use sobolev_lab_core::mollify::mollify;
use sobolev_lab_core::representative::{classify_lp_point, precise_rep, RepresentativeOptions};
use sobolev_lab_core::{Grid, GridFunction, PointVerdict, RadiusSchedule};

const PLANE_IDS: [&str; 9] = ["gauss", "abs_nd", "cubic_kink", "poly_2", "poly_3", "exp1", "bump", "linear", "quadratic"];

fn patch(x: &[f64], half_width: f64, h: f64) -> Arc<Grid> {
    Arc::new(Grid::centered(x, half_width, h).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    // Keep clear of the origin, where abs_nd and cubic_kink are singular.
    (0.1..0.7f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| [r * t.cos(), r * t.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn representatives_are_linear(i in 0usize..9, j in 0usize..9, c in -3.0..3.0f64, x in point()) {
        let g = patch(&x, 0.05, 0.001);
        let f = corpus::sample(PLANE_IDS[i], g.clone()).unwrap();
        let h = corpus::sample(PLANE_IDS[j], g).unwrap();
        let sched = RadiusSchedule::new(0.04, 0.5, 4).unwrap();
        let opts = RepresentativeOptions::default();
        let rf = precise_rep(&f, &x, &sched, &opts).unwrap();
        let rh = precise_rep(&h, &x, &sched, &opts).unwrap();
        let rs = precise_rep(&f.add(&h).unwrap(), &x, &sched, &opts).unwrap();
        let rc = precise_rep(&f.scale(c).unwrap(), &x, &sched, &opts).unwrap();
        // Ball averages are linear in the samples up to rounding.
        for k in 0..4 {
            prop_assert!(close(rs.averages[k][0], rf.averages[k][0] + rh.averages[k][0], 1e-12));
            prop_assert!(close(rc.averages[k][0], c * rf.averages[k][0], 1e-12));
        }
        // The fitted-rate extrapolation is not linear in the data, so the
        // estimates only agree to the size of the extrapolation correction.
        if rf.converged && rh.converged && rs.converged {
            prop_assert!(close(rs.estimate[0], rf.estimate[0] + rh.estimate[0], 1e-8),
                "{} + {}: {} vs {}", PLANE_IDS[i], PLANE_IDS[j], rs.estimate[0], rf.estimate[0] + rh.estimate[0]);
        }
        if rf.converged && rc.converged {
            prop_assert!(close(rc.estimate[0], c * rf.estimate[0], 1e-8));
        }
    }

    #[test]
    fn lp_points_are_closed_downward_in_p(i in 0usize..9, x in point(), p in 1.0..4.0f64, q_frac in 0.0..1.0f64) {
        let g = patch(&x, 0.005, 0.0001);
        let f = corpus::sample(PLANE_IDS[i], g).unwrap();
        let grad = gradient_fd(&f);
        let sched = RadiusSchedule::new(0.004, 0.5, 4).unwrap();
        let opts = RepresentativeOptions::default();
        let q = 1.0 + q_frac * (p - 1.0);
        for field in [&f as &dyn sobolev_lab_core::Field, &grad] {
            let at_p = classify_lp_point(field, &x, p, &sched, &opts).unwrap();
            let at_q = classify_lp_point(field, &x, q, &sched, &opts).unwrap();
            for (dq, dp) in at_q.deviations.iter().zip(&at_p.deviations) {
                prop_assert!(*dq <= dp.powf(q / p) + 1e-10);
            }
            if at_p.verdict == PointVerdict::LpPoint {
                prop_assert_eq!(at_q.verdict, PointVerdict::LpPoint, "{} at {:?}: p={} q={}", PLANE_IDS[i], x, p, q);
            }
        }
    }
}

#[test]
fn product_and_leibniz_rules_at_common_lp_points() {
    let sched = RadiusSchedule::new(0.004, 0.5, 4).unwrap();
    let opts = RepresentativeOptions::default();
    let points = [[0.3, 0.4], [-0.5, 0.2], [0.1, -0.6], [-0.25, -0.25]];
    for &(a, b) in corpus::PRODUCT_PAIRS {
        for x in &points {
            let g = patch(x, 0.005, 0.0001);
            let f = corpus::sample(a, g.clone()).unwrap();
            let h = corpus::sample(b, g).unwrap();
            let fh = f.mul(&h).unwrap();
            let lp = |field: &dyn sobolev_lab_core::Field| {
                let c = classify_lp_point(field, x, 1.0, &sched, &opts).unwrap();
                assert_eq!(c.verdict, PointVerdict::LpPoint, "{a}*{b} at {x:?}");
                c.estimate
            };
            let (fs, hs, fhs) = (lp(&f)[0], lp(&h)[0], lp(&fh)[0]);
            assert!(close(fhs, fs * hs, 1e-8), "{a}*{b} at {x:?}: {fhs} vs {}", fs * hs);
            let (gf, gh, gfh) = (lp(&gradient_fd(&f)), lp(&gradient_fd(&h)), lp(&gradient_fd(&fh)));
            for d in 0..2 {
                let leibniz = fs * gh[d] + hs * gf[d];
                assert!((gfh[d] - leibniz).abs() < 1e-6, "{a}*{b} at {x:?}: {} vs {leibniz}", gfh[d]);
            }
        }
    }
}

#[test]
fn gradient_representative_commutes_with_mollification() {
    let sched = RadiusSchedule::new(0.024, 0.5, 4).unwrap();
    let opts = RepresentativeOptions::default();
    let points = [[0.3, 0.4], [-0.5, 0.2], [0.0, 0.0], [0.45, -0.3]];
    for id in ["gauss", "poly_3", "exp1", "bump", "quadratic"] {
        for x in &points {
            let g = patch(x, 0.05, 0.001);
            let f = corpus::sample(id, g).unwrap();
            let smooth: GridFunction = mollify(&f, 0.004).unwrap().restricted().unwrap();
            let direct = precise_rep(&gradient_fd(&f), x, &sched, &opts).unwrap();
            let via = precise_rep(&gradient_fd(&smooth), x, &sched, &opts).unwrap();
            assert!(direct.converged && via.converged);
            for d in 0..2 {
                assert!((direct.estimate[d] - via.estimate[d]).abs() < 1e-4, "{id} at {x:?}: {direct:?} {via:?}");
            }
        }
    }
}
