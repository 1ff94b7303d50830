//! Typed, validated study configurations.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sobolev_lab_core::capacity::{CapacityOptions, Refinement};
use sobolev_lab_core::convergence::geometric;
use sobolev_lab_core::corpus;
use sobolev_lab_core::hausdorff::PointSet;
use sobolev_lab_core::representative::RepresentativeOptions;
use sobolev_lab_core::taylor::{RemainderNorm, MAX_ORDER};
use sobolev_lab_core::{ConvergenceCriteria, Grid, RadiusSchedule, Region};

use crate::config::{RawConfig, Section};
use crate::LabError;

/// The seven study kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    /// `L_p`-point classification of a function at sample points.
    LpPoint,
    /// Refined-gradient classification over a point sample.
    RefinedGradient,
    /// Condenser capacity, single solve or refinement study.
    Capacity,
    /// Hausdorff pre-measure covers.
    Hausdorff,
    /// Difference quotients against the formal differential.
    DiffQuot,
    /// `L_p`-approximate differentials by regression.
    ApproxDiff,
    /// Taylor remainder studies.
    Taylor,
}

impl StudyKind {
    /// Every kind in a fixed order.
    pub const ALL: [StudyKind; 7] = [
        StudyKind::LpPoint,
        StudyKind::RefinedGradient,
        StudyKind::Capacity,
        StudyKind::Hausdorff,
        StudyKind::DiffQuot,
        StudyKind::ApproxDiff,
        StudyKind::Taylor,
    ];

    /// Config spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            StudyKind::LpPoint => "lp-point",
            StudyKind::RefinedGradient => "refined-gradient",
            StudyKind::Capacity => "capacity",
            StudyKind::Hausdorff => "hausdorff",
            StudyKind::DiffQuot => "diffquot",
            StudyKind::ApproxDiff => "approxdiff",
            StudyKind::Taylor => "taylor",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StudyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        StudyKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = StudyKind::ALL.iter().map(|k| k.as_str()).collect();
            format!("unknown study kind `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Where a function is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// One lattice shared by every point.
    Global(Arc<Grid>),
    /// A fresh lattice centred at each point.
    Patch {
        /// Dimension.
        n: usize,
        /// Half-width of the patch.
        half_width: f64,
        /// Target spacing.
        spacing: f64,
    },
}

impl GridSpec {
    /// Dimension.
    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Global(g) => g.dim(),
            GridSpec::Patch { n, .. } => *n,
        }
    }

    /// Lattice used for point `x`.
    pub fn grid_at(&self, x: &[f64]) -> Result<Arc<Grid>, sobolev_lab_core::Error> {
        match self {
            GridSpec::Global(g) => Ok(g.clone()),
            GridSpec::Patch { half_width, spacing, .. } => Ok(Arc::new(Grid::centered(x, *half_width, *spacing)?)),
        }
    }
}

/// A corpus function on a lattice, evaluated at a list of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointStudy {
    /// Corpus id.
    pub corpus: String,
    /// Sampling lattice.
    pub grid: GridSpec,
    /// Sample points.
    pub points: Vec<Vec<f64>>,
    /// Exponent.
    pub p: f64,
    /// Radius schedule of the averages.
    pub radii: RadiusSchedule,
}

/// The compact set of a condenser.
#[derive(Debug, Clone, PartialEq)]
pub enum CompactSet {
    /// A single point.
    Point(Vec<f64>),
    /// A closed ball.
    Ball(Region),
}

/// Kind-specific settings.
#[derive(Debug, Clone, PartialEq)]
pub enum StudySpec {
    /// `lp-point`.
    LpPoint {
        /// Common settings.
        base: PointStudy,
        /// Classify the finite-difference gradient instead of the values.
        gradient: bool,
    },
    /// `refined-gradient`.
    RefinedGradient {
        /// Common settings.
        base: PointStudy,
        /// Derivative order.
        k: u32,
        /// Also test the lower-order derivatives.
        include_lower: bool,
    },
    /// `capacity`.
    Capacity {
        /// Compact set `K`.
        k: CompactSet,
        /// Open set `Omega`.
        omega: Region,
        /// Exponent.
        p: f64,
        /// Single lattice (`Ok`) or refinement study (`Err`).
        lattice: Result<Grid, Refinement>,
        /// Optimizer settings.
        solver: CapacityOptions,
    },
    /// `hausdorff`.
    Hausdorff {
        /// Sampled set.
        set: PointSet,
        /// Dimension parameter.
        s: f64,
        /// Coarsest covering scale.
        delta: f64,
        /// Number of halvings.
        levels: usize,
    },
    /// `diffquot`.
    DiffQuot {
        /// Common settings.
        base: PointStudy,
        /// Decreasing `t` values.
        ts: Vec<f64>,
        /// Reference region `U` and its lattice size.
        lattice: (Region, usize),
    },
    /// `approxdiff`.
    ApproxDiff(PointStudy),
    /// `taylor`.
    Taylor {
        /// Common settings.
        base: PointStudy,
        /// Order.
        k: u32,
        /// Decreasing `h` values.
        hs: Vec<f64>,
        /// Reference region `V` and its lattice size.
        lattice: (Region, usize),
        /// Norm of the remainder.
        norm: RemainderNorm,
    },
}

/// A validated study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Output file stem.
    pub name: String,
    /// Kind.
    pub kind: StudyKind,
    /// Settings.
    pub spec: StudySpec,
    /// Representative and classifier thresholds.
    pub rep: RepresentativeOptions,
    /// Convergence thresholds.
    pub criteria: ConvergenceCriteria,
    /// Seed of the random point sample.
    pub seed: u64,
}

/// Environment variable holding the sampling seed.
pub const SEED_VAR: &str = "SOBOLEV_LAB_SEED";

/// Reads the seed from the environment (default 0).
pub fn seed_from_env() -> Result<u64, LabError> {
    match std::env::var(SEED_VAR) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|e| LabError::Validation(format!("{SEED_VAR}=`{v}`: {e}"))),
    }
}

fn check(ok: bool, sec: &Section, key: &str, why: &str) -> Result<(), LabError> {
    if ok {
        Ok(())
    } else {
        Err(sec.invalid(key, why))
    }
}

/// Per-axis list or a scalar broadcast to `n` axes.
fn axes<T: FromStr + Clone>(sec: &Section, key: &str, n: usize) -> Result<Vec<T>, LabError>
where
    T::Err: fmt::Display,
{
    let v: Vec<T> = sec.req_list(key)?;
    match v.len() {
        1 => Ok(vec![v[0].clone(); n]),
        m if m == n => Ok(v),
        m => Err(sec.invalid(key, format!("expected 1 or {n} values, got {m}"))),
    }
}

fn geometric_section(cfg: &RawConfig, name: &str) -> Result<Vec<f64>, LabError> {
    let sec = cfg.section(name);
    let first: f64 = sec.req("first")?;
    let ratio: f64 = sec.req("ratio")?;
    let count: usize = sec.req("count")?;
    check(first > 0.0 && first.is_finite(), &sec, "first", "must be positive")?;
    check(ratio > 0.0 && ratio < 1.0, &sec, "ratio", "must lie in (0, 1)")?;
    check(count >= 4, &sec, "count", "must be at least 4")?;
    geometric(first, ratio, count).map_err(|e| sec.invalid("first", e))
}

fn radius_schedule(cfg: &RawConfig) -> Result<RadiusSchedule, LabError> {
    let rs = geometric_section(cfg, "radius")?;
    let sec = cfg.section("radius");
    RadiusSchedule::new(rs[0], sec.req("ratio")?, rs.len()).map_err(|e| sec.invalid("first", e))
}

fn grid_spec(cfg: &RawConfig) -> Result<GridSpec, LabError> {
    let sec = cfg.section("grid");
    let n: usize = sec.req("n")?;
    check((1..=3).contains(&n), &sec, "n", "dimension must be 1, 2 or 3")?;
    if sec.raw("half_width").is_some() || sec.raw("spacing").is_some() {
        let half_width: f64 = sec.req("half_width")?;
        let spacing: f64 = sec.req("spacing")?;
        check(half_width > 0.0, &sec, "half_width", "must be positive")?;
        check(spacing > 0.0 && spacing < half_width, &sec, "spacing", "must lie in (0, half_width)")?;
        check(half_width / spacing <= 5e4, &sec, "spacing", "patch would exceed 1e5 nodes per axis")?;
        return Ok(GridSpec::Patch { n, half_width, spacing });
    }
    Ok(GridSpec::Global(Arc::new(global_grid(&sec, n)?)))
}

fn global_grid(sec: &Section, n: usize) -> Result<Grid, LabError> {
    let lower: Vec<f64> = axes(sec, "lower", n)?;
    let upper: Vec<f64> = axes(sec, "upper", n)?;
    let nodes: Vec<usize> = axes(sec, "nodes", n)?;
    check(lower.iter().zip(&upper).all(|(a, b)| a < b), sec, "upper", "must exceed lower on every axis")?;
    check(nodes.iter().all(|c| *c >= 3), sec, "nodes", "need at least 3 per axis")?;
    check(nodes.iter().map(|c| *c as f64).product::<f64>() <= 5e7, sec, "nodes", "more than 5e7 nodes")?;
    Grid::new(&lower, &upper, &nodes).map_err(|e| sec.invalid("nodes", e))
}

fn points(cfg: &RawConfig, n: usize, seed: u64, corpus_id: &str, order: u32) -> Result<Vec<Vec<f64>>, LabError> {
    let sec = cfg.section("points");
    let mut pts = sec.opt_points("list")?.unwrap_or_default();
    if let Some(count) = sec.opt::<usize>("random")? {
        let lo: f64 = sec.req("lower")?;
        let hi: f64 = sec.req("upper")?;
        let min_norm: f64 = sec.or("min_norm", 0.0)?;
        check(lo < hi, &sec, "upper", "must exceed lower")?;
        check(min_norm < hi.abs().max(lo.abs()), &sec, "min_norm", "excludes the whole box")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut drawn = 0;
        while drawn < count {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() >= min_norm {
                pts.push(x);
                drawn += 1;
            }
        }
    }
    if sec.or("include_origin", false)? {
        pts.push(vec![0.0; n]);
    }
    if sec.or("skip_exceptional", false)? {
        let bad = corpus::get(corpus_id).map(|e| e.exceptional_points(order, n)).unwrap_or_default();
        pts.retain(|x| !bad.iter().any(|b| b.iter().zip(x).all(|(u, v)| (u - v).abs() < 1e-12)));
    }
    if pts.is_empty() {
        return Err(LabError::Validation("missing required field `points.list` (or `points.random`)".into()));
    }
    if let Some(bad) = pts.iter().find(|x| x.len() != n) {
        return Err(sec.invalid("list", format!("point {bad:?} is not in R^{n}")));
    }
    Ok(pts)
}

fn exponent(sec: &Section) -> Result<f64, LabError> {
    let p: f64 = sec.req("p")?;
    check(p >= 1.0 && p.is_finite(), sec, "p", "must be a finite real >= 1")?;
    Ok(p)
}

fn order(sec: &Section, max: u32) -> Result<u32, LabError> {
    let k: u32 = sec.or("k", 1)?;
    check(k >= 1 && k <= max, sec, "k", &format!("must lie in 1..={max}"))?;
    Ok(k)
}

fn point_study(cfg: &RawConfig, seed: u64, order: u32) -> Result<PointStudy, LabError> {
    let study = cfg.section("study");
    let id: String = study.req("corpus")?;
    let entry = corpus::get(&id).map_err(|e| study.invalid("corpus", e))?;
    let p = exponent(&study)?;
    let grid = grid_spec(cfg)?;
    let n = grid.dim();
    check(entry.dims.supports(n), &study, "corpus", &format!("`{id}` is not registered in dimension {n}"))?;
    let radii = radius_schedule(cfg)?;
    let pts = points(cfg, n, seed, &id, order)?;
    let rsec = cfg.section("radius");
    match &grid {
        GridSpec::Global(g) => {
            radii.check_resolvable(g.max_spacing()).map_err(|e| rsec.invalid("first", e))?;
            if let Some(x) = pts.iter().find(|x| !g.contains_ball(x, radii.radii()[0])) {
                return Err(rsec.invalid("first", format!("ball around {x:?} leaves the grid")));
            }
        }
        GridSpec::Patch { half_width, spacing, .. } => {
            radii.check_resolvable(*spacing).map_err(|e| rsec.invalid("first", e))?;
            check(radii.radii()[0] < *half_width, &rsec, "first", "largest radius must fit in the patch")?;
        }
    }
    Ok(PointStudy { corpus: id, grid, points: pts, p, radii })
}

fn reference(cfg: &RawConfig, n: usize) -> Result<(Region, usize), LabError> {
    let sec = cfg.section("lattice");
    let radius: f64 = sec.or("radius", 1.0)?;
    let nodes: usize = sec.or("nodes", 11)?;
    check(radius > 0.0, &sec, "radius", "must be positive")?;
    check(nodes >= 3, &sec, "nodes", "need at least 3")?;
    Ok((Region::ball(&vec![0.0; n], radius).map_err(|e| sec.invalid("radius", e))?, nodes))
}

fn tolerances(cfg: &RawConfig) -> Result<(RepresentativeOptions, ConvergenceCriteria), LabError> {
    let sec = cfg.section("tolerances");
    let (r0, c0) = (RepresentativeOptions::default(), ConvergenceCriteria::default());
    let rep = RepresentativeOptions {
        rep_tol: sec.or("rep_tol", r0.rep_tol)?,
        lp_tol: sec.or("lp_tol", r0.lp_tol)?,
        not_tol: sec.or("not_tol", r0.not_tol)?,
    };
    let criteria = ConvergenceCriteria {
        conv_tol: sec.or("conv_tol", c0.conv_tol)?,
        slope_min: sec.or("slope_min", c0.slope_min)?,
        zero_floor: sec.or("zero_floor", c0.zero_floor)?,
    };
    for (key, v) in [
        ("rep_tol", rep.rep_tol),
        ("lp_tol", rep.lp_tol),
        ("not_tol", rep.not_tol),
        ("conv_tol", criteria.conv_tol),
        ("zero_floor", criteria.zero_floor),
    ] {
        check(v > 0.0 && v.is_finite(), &sec, key, "must be positive")?;
    }
    check(rep.lp_tol < rep.not_tol, &sec, "not_tol", "must exceed lp_tol")?;
    Ok((rep, criteria))
}

fn ball_or_point(sec: &Section, prefix: &str, n: usize) -> Result<CompactSet, LabError> {
    let shape: String = sec.req(prefix)?;
    let center: Vec<f64> = axes(sec, &format!("{prefix}_center"), n)?;
    match shape.as_str() {
        "point" => Ok(CompactSet::Point(center)),
        "ball" => {
            let key = format!("{prefix}_radius");
            let r: f64 = sec.req(&key)?;
            Ok(CompactSet::Ball(Region::ball(&center, r).map_err(|e| sec.invalid(&key, e))?))
        }
        other => Err(sec.invalid(prefix, format!("expected `point` or `ball`, got `{other}`"))),
    }
}

fn capacity(cfg: &RawConfig) -> Result<StudySpec, LabError> {
    let p = exponent(&cfg.section("study"))?;
    let sec = cfg.section("condenser");
    let (lattice, n) = if cfg.has_section("refinement") {
        let r = cfg.section("refinement");
        let n: usize = r.req("n")?;
        check((1..=3).contains(&n), &r, "n", "dimension must be 1, 2 or 3")?;
        let refinement = Refinement {
            lower: axes(&r, "lower", n)?,
            upper: axes(&r, "upper", n)?,
            coarse_nodes: r.req("coarse_nodes")?,
            levels: r.req("levels")?,
        };
        check(refinement.coarse_nodes >= 3, &r, "coarse_nodes", "need at least 3")?;
        check((2..=8).contains(&refinement.levels), &r, "levels", "must lie in 2..=8")?;
        let finest = (refinement.coarse_nodes - 1) as f64 * 2f64.powi(refinement.levels as i32 - 1) + 1.0;
        check(finest.powi(n as i32) <= 5e7, &r, "levels", "finest level exceeds 5e7 nodes")?;
        refinement.grid(0).map_err(|e| r.invalid("lower", e))?;
        (Err(refinement), n)
    } else {
        let g = cfg.section("grid");
        let n: usize = g.req("n")?;
        check((1..=3).contains(&n), &g, "n", "dimension must be 1, 2 or 3")?;
        (Ok(global_grid(&g, n)?), n)
    };
    let k = ball_or_point(&sec, "k", n)?;
    let omega_center: Vec<f64> = axes(&sec, "omega_center", n)?;
    let omega_radius: f64 = sec.req("omega_radius")?;
    let omega = Region::ball(&omega_center, omega_radius).map_err(|e| sec.invalid("omega_radius", e))?;
    let s = cfg.section("solver");
    let d = CapacityOptions::default();
    let solver = CapacityOptions {
        tol: s.or("tol", d.tol)?,
        max_iter: s.or("max_iter", d.max_iter)?,
        memory: s.or("memory", d.memory)?,
        multilevel: s.or("multilevel", d.multilevel)?,
    };
    check(solver.tol > 0.0, &s, "tol", "must be positive")?;
    check(solver.memory >= 1, &s, "memory", "must be at least 1")?;
    Ok(StudySpec::Capacity { k, omega, p, lattice, solver })
}

fn hausdorff(cfg: &RawConfig) -> Result<StudySpec, LabError> {
    let sec = cfg.section("set");
    let n: usize = sec.or("n", 2)?;
    check((1..=3).contains(&n), &sec, "n", "dimension must be 1, 2 or 3")?;
    let shape: String = sec.req("shape")?;
    let count = |key: &str| -> Result<usize, LabError> {
        let c: usize = sec.req(key)?;
        check((1..=2_000_000).contains(&c), &sec, key, "must lie in 1..=2e6")?;
        Ok(c)
    };
    let set = match shape.as_str() {
        "point" => PointSet::point(&axes::<f64>(&sec, "center", n)?),
        "segment" => PointSet::segment(&axes::<f64>(&sec, "a", n)?, &axes::<f64>(&sec, "b", n)?, count("count")?),
        "circle" => {
            check(n == 2, &sec, "n", "circles live in R^2")?;
            let c: Vec<f64> = axes(&sec, "center", 2)?;
            let r: f64 = sec.req("radius")?;
            check(r > 0.0, &sec, "radius", "must be positive")?;
            let m = count("count")?;
            let pts = (0..m)
                .map(|j| {
                    let t = std::f64::consts::TAU * j as f64 / m as f64;
                    vec![c[0] + r * t.cos(), c[1] + r * t.sin()]
                })
                .collect();
            PointSet::new(pts, 2, 0.5 * std::f64::consts::TAU * r / m as f64)
        }
        "ball" => {
            let c: Vec<f64> = axes(&sec, "center", n)?;
            let r: f64 = sec.req("radius")?;
            check(r > 0.0, &sec, "radius", "must be positive")?;
            let nodes = count("nodes")?;
            let lo: Vec<f64> = c.iter().map(|v| v - r).collect();
            let hi: Vec<f64> = c.iter().map(|v| v + r).collect();
            Grid::new(&lo, &hi, &vec![nodes; n])
                .and_then(|g| PointSet::from_region(&Region::ball(&c, r)?, &g))
        }
        other => return Err(sec.invalid("shape", format!("expected point, segment, circle or ball, got `{other}`"))),
    }
    .map_err(|e| sec.invalid("shape", e))?;
    let s: f64 = sec.req("s")?;
    let delta: f64 = sec.req("delta")?;
    let levels: usize = sec.or("levels", 4)?;
    check(s >= 0.0 && s.is_finite(), &sec, "s", "must be >= 0")?;
    check(delta > 0.0, &sec, "delta", "must be positive")?;
    check((1..=12).contains(&levels), &sec, "levels", "must lie in 1..=12")?;
    Ok(StudySpec::Hausdorff { set, s, delta, levels })
}

impl StudyConfig {
    /// Parses and validates config text. `default_name` is used when the
    /// file has no `study.name`.
    pub fn from_text(text: &str, default_name: &str, seed: u64) -> Result<Self, LabError> {
        let cfg = RawConfig::parse(text)?;
        for name in cfg.section_names() {
            if !SECTIONS.contains(&name) {
                return Err(LabError::Validation(format!("unknown section `[{name}]`")));
            }
        }
        let study = cfg.section("study");
        let kind: StudyKind = study.req::<String>("kind")?.parse().map_err(|e: String| study.invalid("kind", e))?;
        let name: String = study.or("name", default_name.to_string())?;
        check(
            !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
            &study,
            "name",
            "use letters, digits, `-`, `_` or `.`",
        )?;
        let (rep, criteria) = tolerances(&cfg)?;
        let spec = match kind {
            StudyKind::LpPoint => {
                let gradient = match study.or("field", "value".to_string())?.as_str() {
                    "value" => false,
                    "gradient" => true,
                    other => return Err(study.invalid("field", format!("expected `value` or `gradient`, got `{other}`"))),
                };
                StudySpec::LpPoint { base: point_study(&cfg, seed, u32::from(gradient))?, gradient }
            }
            StudyKind::RefinedGradient => {
                let k = order(&study, 3)?;
                let include_lower = study.or("include_lower", false)?;
                StudySpec::RefinedGradient { base: point_study(&cfg, seed, k)?, k, include_lower }
            }
            StudyKind::Capacity => capacity(&cfg)?,
            StudyKind::Hausdorff => hausdorff(&cfg)?,
            StudyKind::DiffQuot => {
                let base = point_study(&cfg, seed, 1)?;
                let lattice = reference(&cfg, base.grid.dim())?;
                StudySpec::DiffQuot { ts: geometric_section(&cfg, "t")?, lattice, base }
            }
            StudyKind::ApproxDiff => StudySpec::ApproxDiff(point_study(&cfg, seed, 1)?),
            StudyKind::Taylor => {
                let k = order(&study, MAX_ORDER)?;
                let base = point_study(&cfg, seed, k)?;
                let lattice = reference(&cfg, base.grid.dim())?;
                let norm = match study.or("norm", "full".to_string())?.as_str() {
                    "full" => RemainderNorm::Full,
                    "top" => RemainderNorm::TopOrder,
                    other => return Err(study.invalid("norm", format!("expected `full` or `top`, got `{other}`"))),
                };
                StudySpec::Taylor { k, hs: geometric_section(&cfg, "h")?, lattice, norm, base }
            }
        };
        Ok(StudyConfig { name, kind, spec, rep, criteria, seed })
    }

    /// Reads and validates a config file; the file stem is the default name.
    pub fn from_path(path: &std::path::Path, seed: u64) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("study");
        Self::from_text(&text, stem, seed)
    }
}

const SECTIONS: [&str; 12] =
    ["study", "grid", "points", "radius", "t", "h", "lattice", "tolerances", "condenser", "refinement", "solver", "set"];
