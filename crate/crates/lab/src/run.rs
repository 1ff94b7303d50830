//! Dispatch of a validated study to the core and assembly of its outputs.
//!
//! Independent sample points are mapped in parallel on the current rayon
//! pool; results are collected in input order, so outputs do not depend on
//! the worker count.

use std::fmt::Write as _;

use rayon::prelude::*;
use sobolev_lab_core::capacity::{cap_null_classify, p_capacity, CondenserProblem, CondenserSet};
use sobolev_lab_core::differentiability::{
    diffquot_study, lp_approx_differential, FormalDifferential, ReferenceLattice, RegressionOptions,
};
use sobolev_lab_core::grid::gradient_fd;
use sobolev_lab_core::hausdorff::{hausdorff_upper, vanishes, PointSet};
use sobolev_lab_core::representative::{classify_lp_point, classify_refined_gradient};
use sobolev_lab_core::taylor::{remainder_study, taylor_data, MultiIndex};
use sobolev_lab_core::{corpus, ConvergenceReport, Error, GridFunction, PointVerdict};

use crate::output::{fmt_f64, fmt_vec, Cell, StudyOutput, Table};
use crate::study::{CompactSet, PointStudy, StudyConfig, StudySpec};
use crate::LabError;

fn coord_names(n: usize) -> Vec<String> {
    (1..=n).map(|d| format!("x{d}")).collect()
}

fn lead(i: usize, x: &[f64]) -> Vec<Cell> {
    let mut row = vec![Cell::from(i)];
    row.extend(x.iter().map(|v| Cell::from(*v)));
    row
}

fn header(extra: &[&str], n: usize) -> Vec<String> {
    let mut h = vec!["point".to_string()];
    h.extend(coord_names(n));
    h.extend(extra.iter().map(|s| s.to_string()));
    h
}

fn summary_head(cfg: &StudyConfig) -> String {
    let mut s = String::new();
    writeln!(s, "study: {}", cfg.name).unwrap();
    writeln!(s, "kind: {}", cfg.kind).unwrap();
    writeln!(s, "seed: {}", cfg.seed).unwrap();
    s
}

fn report_lines(s: &mut String, r: &ConvergenceReport) {
    writeln!(s, "  verdict: {}", r.verdict).unwrap();
    writeln!(s, "  slope: {}", fmt_f64(r.slope)).unwrap();
    writeln!(s, "  last_error: {}", fmt_f64(r.last_error())).unwrap();
}

/// Maps `f` over the sample points with the sampled function at each.
fn per_point<T: Send>(
    base: &PointStudy,
    f: impl Fn(&GridFunction, &[f64]) -> Result<T, Error> + Sync,
) -> Result<Vec<T>, Error> {
    base.points
        .par_iter()
        .map(|x| {
            let grid = base.grid.grid_at(x)?;
            let field = corpus::sample(&base.corpus, grid)?;
            f(&field, x)
        })
        .collect()
}

fn base_summary(cfg: &StudyConfig, base: &PointStudy) -> String {
    let mut s = summary_head(cfg);
    writeln!(s, "corpus: {}", base.corpus).unwrap();
    writeln!(s, "p: {}", fmt_f64(base.p)).unwrap();
    writeln!(s, "points: {}", base.points.len()).unwrap();
    s
}

/// Runs a validated study. Core failures surface as [`LabError::Numeric`].
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutput, LabError> {
    let (rep, crit) = (&cfg.rep, &cfg.criteria);
    match &cfg.spec {
        StudySpec::LpPoint { base, gradient } => {
            let n = base.grid.dim();
            let res = per_point(base, |f, x| {
                if *gradient {
                    classify_lp_point(&gradient_fd(f), x, base.p, &base.radii, rep)
                } else {
                    classify_lp_point(f, x, base.p, &base.radii, rep)
                }
            })?;
            let m = if *gradient { n } else { 1 };
            let mut cols = vec!["r".to_string()];
            if m == 1 {
                cols.push("average".to_string());
            } else {
                cols.extend((1..=m).map(|c| format!("average{c}")));
            }
            cols.push("deviation".to_string());
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut table = Table::new(header(&cols, n));
            let mut s = base_summary(cfg, base);
            writeln!(s, "field: {}", if *gradient { "gradient" } else { "value" }).unwrap();
            for (i, (x, c)) in base.points.iter().zip(&res).enumerate() {
                for j in 0..c.radii.len() {
                    let mut row = lead(i, x);
                    row.push(c.radii[j].into());
                    row.extend(c.averages[j].iter().map(|v| Cell::from(*v)));
                    row.push(c.deviations[j].into());
                    table.push(row);
                }
                writeln!(s, "point {i}: {}", fmt_vec(x)).unwrap();
                writeln!(s, "  verdict: {}", c.verdict).unwrap();
                writeln!(s, "  estimate: {}", fmt_vec(&c.estimate)).unwrap();
                writeln!(s, "  converged: {}", c.converged).unwrap();
                writeln!(s, "  slope: {}", fmt_f64(c.slope)).unwrap();
            }
            Ok(StudyOutput { table, summary: s })
        }
        StudySpec::RefinedGradient { base, k, include_lower } => {
            let n = base.grid.dim();
            let res = per_point(base, |f, x| {
                let t = classify_refined_gradient(f, base.p, &[x.to_vec()], *k, *include_lower, &base.radii, rep)?;
                Ok(t.rows.into_iter().next().expect("one point in, one row out"))
            })?;
            let mut table = Table::new(header(&["alpha", "r", "deviation"], n));
            let mut s = base_summary(cfg, base);
            writeln!(s, "order: {k}").unwrap();
            let exceptional: Vec<usize> =
                res.iter().enumerate().filter(|(_, r)| r.verdict != PointVerdict::LpPoint).map(|(i, _)| i).collect();
            writeln!(s, "exceptional: {}", exceptional.len()).unwrap();
            writeln!(s, "exceptional_points: {exceptional:?}").unwrap();
            writeln!(s, "failing_fraction: {}", fmt_f64(exceptional.len() as f64 / res.len() as f64)).unwrap();
            for (i, (x, row)) in base.points.iter().zip(&res).enumerate() {
                let mut classes: Vec<(String, _)> = Vec::new();
                if let Some(g) = &row.gradient {
                    classes.push(("grad".to_string(), g));
                }
                for (a, c) in &row.entries {
                    classes.push((MultiIndex(a.clone()).to_string(), c));
                }
                writeln!(s, "point {i}: {}", fmt_vec(x)).unwrap();
                writeln!(s, "  verdict: {}", row.verdict).unwrap();
                for (name, c) in classes {
                    for j in 0..c.radii.len() {
                        let mut r = lead(i, x);
                        r.extend([name.clone().into(), c.radii[j].into(), c.deviations[j].into()]);
                        table.push(r);
                    }
                    writeln!(s, "  {name}: {} estimate {}", c.verdict, fmt_vec(&c.estimate)).unwrap();
                }
            }
            Ok(StudyOutput { table, summary: s })
        }
        StudySpec::Capacity { k, omega, p, lattice, solver } => {
            let point;
            let set: &dyn CondenserSet = match k {
                CompactSet::Point(x) => {
                    point = PointSet::point(x)?;
                    &point
                }
                CompactSet::Ball(b) => b,
            };
            let mut s = summary_head(cfg);
            writeln!(s, "p: {}", fmt_f64(*p)).unwrap();
            let mut table = Table::new(["level", "h", "energy", "iterations", "k_volume"]);
            match lattice {
                Ok(grid) => {
                    let prob = CondenserProblem::from_sets(grid.clone(), set, omega, *p)?;
                    let k_volume: f64 = (0..grid.len()).filter(|&i| prob.k_mask()[i]).map(|i| grid.node_volume(i)).sum();
                    let est = p_capacity(&prob, solver)?;
                    table.push(vec![
                        0usize.into(),
                        grid.max_spacing().into(),
                        est.energy.into(),
                        est.iterations.into(),
                        k_volume.into(),
                    ]);
                    writeln!(s, "energy: {}", fmt_f64(est.energy)).unwrap();
                    writeln!(s, "iterations: {}", est.iterations).unwrap();
                    writeln!(s, "projected_gradient: {}", fmt_f64(est.projected_gradient)).unwrap();
                }
                Err(refinement) => {
                    let c = cap_null_classify(set, omega, *p, refinement, solver)?;
                    for (l, e) in c.levels.iter().enumerate() {
                        table.push(vec![l.into(), e.h.into(), e.energy.into(), e.iterations.into(), e.k_volume.into()]);
                    }
                    writeln!(s, "levels: {}", c.levels.len()).unwrap();
                    writeln!(s, "verdict: {}", c.verdict).unwrap();
                    writeln!(s, "slope: {}", fmt_f64(c.slope)).unwrap();
                    let last = c.levels.last().expect("at least two levels");
                    writeln!(s, "energy: {}", fmt_f64(last.energy)).unwrap();
                }
            }
            Ok(StudyOutput { table, summary: s })
        }
        StudySpec::Hausdorff { set, s: dim, delta, levels } => {
            let est = hausdorff_upper(set, *dim, *delta, *levels)?;
            let mut table = Table::new(["level", "delta", "value"]);
            for (l, (d, v)) in est.history.iter().enumerate() {
                table.push(vec![l.into(), (*d).into(), (*v).into()]);
            }
            let mut s = summary_head(cfg);
            writeln!(s, "s: {}", fmt_f64(*dim)).unwrap();
            writeln!(s, "samples: {}", set.points().len()).unwrap();
            writeln!(s, "value: {}", fmt_f64(est.value)).unwrap();
            writeln!(s, "cells: {}", est.cells.len()).unwrap();
            writeln!(s, "vanishes: {}", vanishes(&est.history)).unwrap();
            Ok(StudyOutput { table, summary: s })
        }
        StudySpec::DiffQuot { base, ts, lattice } => {
            let n = base.grid.dim();
            let lat = ReferenceLattice::new(&lattice.0, lattice.1)?;
            let res = per_point(base, |f, x| {
                let l = FormalDifferential::of_function(f, x, &base.radii, rep)?;
                diffquot_study(f, &l, base.p, &lat, ts, crit)
            })?;
            let mut table = Table::new(header(&["t", "value_part", "gradient_part", "total"], n));
            let mut s = base_summary(cfg, base);
            for (i, (x, st)) in base.points.iter().zip(&res).enumerate() {
                for (t, e) in ts.iter().zip(&st.parts) {
                    let mut row = lead(i, x);
                    row.extend([(*t).into(), e.value_part.into(), e.gradient_part.into(), e.total.into()]);
                    table.push(row);
                }
                writeln!(s, "point {i}: {}", fmt_vec(x)).unwrap();
                writeln!(s, "  differential: {}", fmt_vec(st.differential.coefficients())).unwrap();
                report_lines(&mut s, &st.report);
            }
            Ok(StudyOutput { table, summary: s })
        }
        StudySpec::ApproxDiff(base) => {
            let n = base.grid.dim();
            let reg = RegressionOptions::default();
            let res = per_point(base, |f, x| lp_approx_differential(f, x, base.p, &base.radii, rep, &reg, crit))?;
            let mut extra = vec!["r".to_string(), "residual".to_string()];
            extra.extend((1..=n).map(|d| format!("a{d}")));
            let extra: Vec<&str> = extra.iter().map(String::as_str).collect();
            let mut table = Table::new(header(&extra, n));
            let mut s = base_summary(cfg, base);
            for (i, (x, ad)) in base.points.iter().zip(&res).enumerate() {
                for (j, a) in ad.fits.iter().enumerate() {
                    let mut row = lead(i, x);
                    row.extend([ad.report.params[j].into(), ad.report.errors[j].into()]);
                    row.extend(a.iter().map(|v| Cell::from(*v)));
                    table.push(row);
                }
                writeln!(s, "point {i}: {}", fmt_vec(x)).unwrap();
                report_lines(&mut s, &ad.report);
                writeln!(s, "  value: {}", fmt_f64(ad.value)).unwrap();
                writeln!(s, "  a_fit: {}", fmt_vec(&ad.a_fit)).unwrap();
                match &ad.gradient_rep {
                    Some(g) => writeln!(s, "  gradient_rep: {}", fmt_vec(g)).unwrap(),
                    None => writeln!(s, "  gradient_rep: unsettled").unwrap(),
                }
                let m = ad.matches_gradient.map_or("n/a".to_string(), |b| b.to_string());
                writeln!(s, "  matches_gradient: {m}").unwrap();
            }
            Ok(StudyOutput { table, summary: s })
        }
        StudySpec::Taylor { base, k, hs, lattice, norm } => {
            let n = base.grid.dim();
            let lat = ReferenceLattice::new(&lattice.0, lattice.1)?;
            let res = per_point(base, |f, x| {
                let td = taylor_data(f, x, *k, &base.radii, rep)?;
                remainder_study(f, &td, base.p, &lat, hs, *norm, crit)
            })?;
            let mut table = Table::new(header(&["h", "error"], n));
            let mut s = base_summary(cfg, base);
            writeln!(s, "order: {k}").unwrap();
            for (i, (x, st)) in base.points.iter().zip(&res).enumerate() {
                for (h, e) in hs.iter().zip(&st.report.errors) {
                    let mut row = lead(i, x);
                    row.extend([(*h).into(), (*e).into()]);
                    table.push(row);
                }
                writeln!(s, "point {i}: {}", fmt_vec(x)).unwrap();
                report_lines(&mut s, &st.report);
                for c in &st.taylor.coefficients {
                    let flag = if c.converged { "" } else { " (unsettled)" };
                    writeln!(s, "  coefficient {}: {}{flag}", c.alpha, fmt_f64(c.value)).unwrap();
                }
            }
            Ok(StudyOutput { table, summary: s })
        }
    }
}
