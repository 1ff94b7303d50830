//! Monotonicity of the discrete capacity in `K` and `Omega`, insensitivity
//! to the smoothing parameter and the capacity-null to measure-null shadow.

use proptest::prelude::*;
use sobolev_lab_core::capacity::{
    cap_null_classify, p_capacity, CapacityOptions, CondenserProblem, NullVerdict, Refinement,
};
use sobolev_lab_core::hausdorff::PointSet;
use sobolev_lab_core::{Grid, Region};

fn tight() -> CapacityOptions {
    CapacityOptions { tol: 1e-10, max_iter: 200_000, ..CapacityOptions::default() }
}

/// Nodes whose closed 3x3 neighbourhood lies in `omega`.
fn admissible(grid: &Grid, omega: &[bool]) -> Vec<usize> {
    let c = grid.counts();
    (0..grid.len())
        .filter(|&i| {
            let (a, b) = (i % c[0], i / c[0]);
            if a == 0 || b == 0 || a + 1 == c[0] || b + 1 == c[1] {
                return false;
            }
            (0..9).all(|code| {
                let (da, db) = (code % 3, code / 3);
                omega[grid.linear_index(&[a + da - 1, b + db - 1])]
            })
        })
        .collect()
}

fn energy(grid: &Grid, k: &[bool], omega: &[bool], p: f64) -> f64 {
    let prob = CondenserProblem::new(grid.clone(), k.to_vec(), omega.to_vec(), p).unwrap();
    p_capacity(&prob, &tight()).unwrap().energy
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn capacity_grows_with_k(
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6),
        extra in prop::collection::vec(any::<prop::sample::Index>(), 1..6),
        p in prop::sample::select(vec![2.0, 3.0]),
    ) {
        let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
        let omega = Region::ball(&[0.0, 0.0], 0.95).unwrap().node_mask(&g).unwrap();
        let cand = admissible(&g, &omega);
        let mut k1 = vec![false; g.len()];
        for ix in &picks {
            k1[cand[ix.index(cand.len())]] = true;
        }
        let mut k2 = k1.clone();
        for ix in &extra {
            k2[cand[ix.index(cand.len())]] = true;
        }
        let (e1, e2) = (energy(&g, &k1, &omega, p), energy(&g, &k2, &omega, p));
        prop_assert!(e1 <= e2 + 1e-8, "{e1} > {e2}");
    }

    #[test]
    fn capacity_shrinks_with_omega(
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..5),
        r1 in 0.55..0.75f64,
        grow in 0.05..0.25f64,
        p in prop::sample::select(vec![2.0, 3.0]),
    ) {
        let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
        let small = Region::ball(&[0.0, 0.0], r1).unwrap().node_mask(&g).unwrap();
        let large = Region::ball(&[0.0, 0.0], r1 + grow).unwrap().node_mask(&g).unwrap();
        let inner = Region::ball(&[0.0, 0.0], 0.3).unwrap().node_mask(&g).unwrap();
        let cand: Vec<usize> = admissible(&g, &small).into_iter().filter(|&i| inner[i]).collect();
        let mut k = vec![false; g.len()];
        for ix in &picks {
            k[cand[ix.index(cand.len())]] = true;
        }
        let (e_small, e_large) = (energy(&g, &k, &small, p), energy(&g, &k, &large, p));
        prop_assert!(e_small >= e_large - 1e-8, "{e_small} < {e_large}");
    }
}

#[test]
fn doubling_the_smoothing_barely_moves_the_energy() {
    let g = Grid::cube(2, -1.0, 1.0, 33).unwrap();
    let k = Region::ball(&[0.0, 0.0], 0.3).unwrap();
    let omega = Region::ball(&[0.0, 0.0], 0.9).unwrap();
    let opts = CapacityOptions { tol: 1e-7, ..CapacityOptions::default() };
    // At p = 1 the energy is not differentiable where the gradient vanishes
    // and the smoothing bias is first order in delta; above 1 it fades fast.
    for (p, band) in [(1.0, 3e-2), (1.25, 5e-3), (1.5, 1e-4), (1.9, 1e-6)] {
        let base = CondenserProblem::from_sets(g.clone(), &k, &omega, p).unwrap();
        let delta = base.delta();
        let e1 = p_capacity(&base, &opts).unwrap().energy;
        let e2 = p_capacity(&base.with_delta(2.0 * delta).unwrap(), &opts).unwrap().energy;
        // Both runs report the unsmoothed energy of their minimizers.
        assert!(e1.is_finite() && (e1 - e2).abs() <= band * e1, "p={p}: {e1} vs {e2}");
    }
}

#[test]
fn null_suggested_sets_have_vanishing_node_volume() {
    let refinement = Refinement { lower: vec![-1.0, -1.0], upper: vec![1.0, 1.0], coarse_nodes: 9, levels: 4 };
    let omega = Region::ball(&[0.0, 0.0], 1.0).unwrap();
    let opts = CapacityOptions { tol: 1e-4, ..CapacityOptions::default() };
    let point = PointSet::point(&[0.0, 0.0]).unwrap();
    let class = cap_null_classify(&point, &omega, 1.0, &refinement, &opts).unwrap();
    assert_eq!(class.verdict, NullVerdict::NullSuggested, "{class:?}");
    let vols: Vec<f64> = class.levels.iter().map(|l| l.k_volume).collect();
    assert!(vols.windows(2).all(|w| w[1] < w[0]), "{vols:?}");
    assert!(vols[vols.len() - 1] < 0.1 * vols[0]);
}
