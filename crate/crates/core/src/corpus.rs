//! Registry of analytic test functions with membership claims.
//!
//! The annotations are claims under test: the acceptance suite compares the
//! classifiers against them, so a wrong annotation shows up as a failure.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::grid::{Grid, GridFunction};

/// Smoothness class of a corpus function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// Infinitely differentiable.
    CInfinity,
    /// Polynomial of the given degree.
    Polynomial(u32),
    /// Continuously differentiable, second derivatives bounded but discontinuous.
    C1,
    /// Lipschitz with a gradient jump.
    Lipschitz,
}

/// Function spaces that annotations refer to (local versions throughout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// `W^1_p`.
    W1p,
    /// `W^2_p`.
    W2p,
    /// `RW^1_p`: refined gradient of order 1.
    RW1p,
    /// `RW^2_p`: refined gradients of order 2.
    RW2p,
}

/// Range of exponents `p` an annotation covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentRange {
    /// Lower end.
    pub lo: f64,
    /// Whether `lo` itself is included.
    pub lo_inclusive: bool,
    /// Upper end (may be infinite).
    pub hi: f64,
}

impl ExponentRange {
    /// Every `p >= 1`.
    pub const ALL: Self = Self { lo: 1.0, lo_inclusive: true, hi: f64::INFINITY };
    /// Only `p = 1`.
    pub const ONE: Self = Self { lo: 1.0, lo_inclusive: true, hi: 1.0 };
    /// Every `p > 1`.
    pub const ABOVE_ONE: Self = Self { lo: 1.0, lo_inclusive: false, hi: f64::INFINITY };

    /// Whether `p` is in the range.
    pub fn contains(&self, p: f64) -> bool {
        let above = if self.lo_inclusive { p >= self.lo } else { p > self.lo };
        above && p <= self.hi
    }

    fn overlaps(&self, other: &Self) -> bool {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo < hi {
            return true;
        }
        lo == hi && self.contains(lo) && other.contains(lo)
    }

    fn covers(&self, other: &Self) -> bool {
        let lo_ok = self.lo < other.lo
            || (self.lo == other.lo && (self.lo_inclusive || !other.lo_inclusive));
        lo_ok && self.hi >= other.hi
    }
}

/// One membership claim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotation {
    /// The space.
    pub space: Space,
    /// Exponents covered.
    pub exponents: ExponentRange,
    /// `true` for "belongs", `false` for "does not belong".
    pub member: bool,
}

/// Dimensions a corpus function is registered for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dims {
    /// Exactly this dimension.
    Fixed(usize),
    /// Any dimension in the inclusive range.
    Range(usize, usize),
    /// Every dimension.
    Any,
}

impl Dims {
    /// Whether dimension `n` is supported.
    pub fn supports(&self, n: usize) -> bool {
        match *self {
            Dims::Fixed(m) => n == m,
            Dims::Range(a, b) => n >= a && n <= b,
            Dims::Any => n >= 1,
        }
    }

    /// Smallest supported dimension.
    pub fn default_dim(&self) -> usize {
        match *self {
            Dims::Fixed(m) => m,
            Dims::Range(a, _) => a,
            Dims::Any => 2,
        }
    }
}

/// Singular set of a corpus function for derivatives of a given order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exceptional {
    /// Derivative order at which the points are exceptional.
    pub order: u32,
}

/// A registered analytic function.
#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    /// Registry id.
    pub id: &'static str,
    /// One-line description.
    pub description: &'static str,
    /// Supported dimensions.
    pub dims: Dims,
    /// Point evaluator.
    pub eval: fn(&[f64]) -> f64,
    /// Analytic gradient, when registered.
    pub gradient: Option<fn(&[f64], &mut [f64])>,
    /// Smoothness class.
    pub smoothness: Smoothness,
    /// Membership claims.
    pub annotations: &'static [Annotation],
    /// The origin is the only singular point of every registered function;
    /// these entries say at which derivative orders it is exceptional.
    pub exceptional_at_origin: &'static [Exceptional],
}

impl CorpusEntry {
    /// Claimed membership in `space` for exponent `p`, if annotated.
    pub fn membership(&self, space: Space, p: f64) -> Option<bool> {
        self.annotations
            .iter()
            .find(|a| a.space == space && a.exponents.contains(p))
            .map(|a| a.member)
    }

    /// Exceptional points for derivatives of order `order` in dimension `n`.
    pub fn exceptional_points(&self, order: u32, n: usize) -> Vec<Vec<f64>> {
        if self.exceptional_at_origin.iter().any(|e| e.order == order) {
            vec![vec![0.0; n]]
        } else {
            Vec::new()
        }
    }

    /// Samples the function on `grid`.
    pub fn sample(&self, grid: Arc<Grid>) -> Result<GridFunction> {
        if !self.dims.supports(grid.dim()) {
            return Err(domain!("corpus `{}` is not registered in dimension {}", self.id, grid.dim()));
        }
        GridFunction::from_fn(grid, self.eval)
    }

    /// Checks that the claims do not contradict one another: a positive and a
    /// negative claim on overlapping exponents, or `W^2_p` membership without
    /// the implied `RW^1_p` membership.
    pub fn check_consistency(&self) -> Result<()> {
        for (i, a) in self.annotations.iter().enumerate() {
            for b in &self.annotations[i + 1..] {
                if a.space == b.space && a.member != b.member && a.exponents.overlaps(&b.exponents) {
                    return Err(domain!("`{}`: contradictory claims for {:?}", self.id, a.space));
                }
            }
            if a.space == Space::W2p && a.member {
                let implied = self.annotations.iter().any(|b| {
                    b.space == Space::RW1p && b.member && b.exponents.covers(&a.exponents)
                });
                if !implied {
                    return Err(domain!("`{}`: W2p claim without the implied RW1p claim", self.id));
                }
            }
        }
        Ok(())
    }
}

const LINEAR_COEFFS: [f64; 4] = [0.7, -1.3, 0.4, 0.9];

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn abs_eval(y: &[f64]) -> f64 {
    norm(y)
}
fn abs_grad(y: &[f64], g: &mut [f64]) {
    let r = norm(y);
    for (gi, yi) in g.iter_mut().zip(y) {
        *gi = if r > 0.0 { yi / r } else { 0.0 };
    }
}
fn gauss_eval(y: &[f64]) -> f64 {
    (-y.iter().map(|v| v * v).sum::<f64>()).exp()
}
fn gauss_grad(y: &[f64], g: &mut [f64]) {
    let e = gauss_eval(y);
    for (gi, yi) in g.iter_mut().zip(y) {
        *gi = -2.0 * yi * e;
    }
}
fn linear_eval(y: &[f64]) -> f64 {
    y.iter().zip(LINEAR_COEFFS.iter().cycle()).map(|(v, a)| a * v).sum()
}
fn linear_grad(_y: &[f64], g: &mut [f64]) {
    for (gi, a) in g.iter_mut().zip(LINEAR_COEFFS.iter().cycle()) {
        *gi = *a;
    }
}
fn quadratic_eval(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum()
}
fn quadratic_grad(y: &[f64], g: &mut [f64]) {
    for (gi, yi) in g.iter_mut().zip(y) {
        *gi = 2.0 * yi;
    }
}
fn cubic_kink_eval(y: &[f64]) -> f64 {
    y[0] * norm(y)
}
fn cubic_kink_grad(y: &[f64], g: &mut [f64]) {
    let r = norm(y);
    for (i, gi) in g.iter_mut().enumerate() {
        let cross = if r > 0.0 { y[0] * y[i] / r } else { 0.0 };
        *gi = if i == 0 { r + cross } else { cross };
    }
}
fn poly2_eval(y: &[f64]) -> f64 {
    let (a, b) = (y[0], y[1]);
    1.0 + a - 2.0 * b + 0.5 * a * a + a * b - 0.25 * b * b
}
fn poly2_grad(y: &[f64], g: &mut [f64]) {
    let (a, b) = (y[0], y[1]);
    g[0] = 1.0 + a + b;
    g[1] = -2.0 + a - 0.5 * b;
}
fn poly3_eval(y: &[f64]) -> f64 {
    let (a, b) = (y[0], y[1]);
    poly2_eval(y) + a * a * a / 6.0 - 0.3 * a * a * b + 0.2 * b * b * b
}
fn poly3_grad(y: &[f64], g: &mut [f64]) {
    poly2_grad(y, g);
    let (a, b) = (y[0], y[1]);
    g[0] += 0.5 * a * a - 0.6 * a * b;
    g[1] += -0.3 * a * a + 0.6 * b * b;
}
fn exp1_eval(y: &[f64]) -> f64 {
    y[0].exp()
}
fn exp1_grad(y: &[f64], g: &mut [f64]) {
    for gi in g.iter_mut() {
        *gi = 0.0;
    }
    g[0] = y[0].exp();
}
fn bump_eval(y: &[f64]) -> f64 {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    if r2 < 1.0 {
        (1.0 / (r2 - 1.0)).exp()
    } else {
        0.0
    }
}
fn bump_grad(y: &[f64], g: &mut [f64]) {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    for (gi, yi) in g.iter_mut().zip(y) {
        *gi = if r2 < 1.0 {
            let d = r2 - 1.0;
            -2.0 * yi / (d * d) * (1.0 / d).exp()
        } else {
            0.0
        };
    }
}
fn constant_eval(_y: &[f64]) -> f64 {
    1.0
}
fn constant_grad(_y: &[f64], g: &mut [f64]) {
    for gi in g.iter_mut() {
        *gi = 0.0;
    }
}

const SMOOTH: &[Annotation] = &[
    Annotation { space: Space::W1p, exponents: ExponentRange::ALL, member: true },
    Annotation { space: Space::W2p, exponents: ExponentRange::ALL, member: true },
    Annotation { space: Space::RW1p, exponents: ExponentRange::ALL, member: true },
    Annotation { space: Space::RW2p, exponents: ExponentRange::ALL, member: true },
];

static ENTRIES: &[CorpusEntry] = &[
    CorpusEntry {
        id: "abs_1d",
        description: "f(y) = |y| on the line; gradient jumps at 0",
        dims: Dims::Fixed(1),
        eval: abs_eval,
        gradient: Some(abs_grad),
        smoothness: Smoothness::Lipschitz,
        annotations: &[
            Annotation { space: Space::W1p, exponents: ExponentRange::ALL, member: true },
            Annotation { space: Space::RW1p, exponents: ExponentRange::ABOVE_ONE, member: false },
        ],
        // A point has positive p-capacity on the line, so 0 is a genuine failure point.
        exceptional_at_origin: &[Exceptional { order: 1 }],
    },
    CorpusEntry {
        id: "abs_nd",
        description: "f(y) = |y| in R^n, n = 2 or 3; gradient y/|y| has no limit at 0",
        dims: Dims::Range(2, 3),
        eval: abs_eval,
        gradient: Some(abs_grad),
        smoothness: Smoothness::Lipschitz,
        annotations: &[
            Annotation { space: Space::W1p, exponents: ExponentRange::ALL, member: true },
            Annotation { space: Space::RW1p, exponents: ExponentRange::ONE, member: true },
            Annotation { space: Space::W2p, exponents: ExponentRange::ONE, member: false },
        ],
        exceptional_at_origin: &[Exceptional { order: 1 }],
    },
    CorpusEntry {
        id: "gauss",
        description: "f(y) = exp(-|y|^2)",
        dims: Dims::Any,
        eval: gauss_eval,
        gradient: Some(gauss_grad),
        smoothness: Smoothness::CInfinity,
        annotations: SMOOTH,
        exceptional_at_origin: &[],
    },
    CorpusEntry {
        id: "linear",
        description: "f(y) = a.y with a = (0.7, -1.3, 0.4, 0.9, ...)",
        dims: Dims::Any,
        eval: linear_eval,
        gradient: Some(linear_grad),
        smoothness: Smoothness::Polynomial(1),
        annotations: SMOOTH,
        exceptional_at_origin: &[],
    },
    CorpusEntry {
        id: "quadratic",
        description: "f(y) = |y|^2",
        dims: Dims::Any,
        eval: quadratic_eval,
        gradient: Some(quadratic_grad),
        smoothness: Smoothness::Polynomial(2),
        annotations: SMOOTH,
        exceptional_at_origin: &[],
    },
    CorpusEntry {
        id: "cubic_kink",
        description: "f(y) = y_1 |y|; C^1, second derivatives jump at 0",
        dims: Dims::Any,
        eval: cubic_kink_eval,
        gradient: Some(cubic_kink_grad),
        smoothness: Smoothness::C1,
        annotations: &[
            Annotation { space: Space::W1p, exponents: ExponentRange::ALL, member: true },
            Annotation { space: Space::W2p, exponents: ExponentRange::ALL, member: true },
            Annotation { space: Space::RW1p, exponents: ExponentRange::ALL, member: true },
        ],
        exceptional_at_origin: &[Exceptional { order: 2 }],
    },
    CorpusEntry {
        id: "poly_2",
        description: "degree-2 polynomial in R^2",
        dims: Dims::Fixed(2),
        eval: poly2_eval,
        gradient: Some(poly2_grad),
        smoothness: Smoothness::Polynomial(2),
        annotations: SMOOTH,
        exceptional_at_origin: &[],
    },
    CorpusEntry {
        id: "poly_3",
        description: "degree-3 polynomial in R^2",
        dims: Dims::Fixed(2),
        eval: poly3_eval,
        gradient: Some(poly3_grad),
        smoothness: Smoothness::Polynomial(3),
        annotations: SMOOTH,
        exceptional_at_origin: &[],
    },
    CorpusEntry {
        id: "exp1",
        description: "f(y) = exp(y_1)",
        dims: Dims::Any,
        eval: exp1_eval,
        gradient: Some(exp1_grad),
        smoothness: Smoothness::CInfinity,
        annotations: SMOOTH,
        exceptional_at_origin: &[],
    },
    CorpusEntry {
        id: "bump",
        description: "unnormalized mollifier bump exp(1/(|y|^2 - 1)) on the unit ball",
        dims: Dims::Any,
        eval: bump_eval,
        gradient: Some(bump_grad),
        smoothness: Smoothness::CInfinity,
        annotations: SMOOTH,
        exceptional_at_origin: &[],
    },
    CorpusEntry {
        id: "constant",
        description: "f(y) = 1",
        dims: Dims::Any,
        eval: constant_eval,
        gradient: Some(constant_grad),
        smoothness: Smoothness::Polynomial(0),
        annotations: SMOOTH,
        exceptional_at_origin: &[],
    },
];

/// Pairs used for the product and Leibniz checks.
pub const PRODUCT_PAIRS: &[(&str, &str)] = &[
    ("gauss", "quadratic"),
    ("gauss", "abs_nd"),
    ("exp1", "cubic_kink"),
    ("linear", "bump"),
];

/// Every registered entry, in registration order.
pub fn entries() -> &'static [CorpusEntry] {
    ENTRIES
}

/// Looks up an entry by id.
pub fn get(id: &str) -> Result<&'static CorpusEntry> {
    ENTRIES
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::Lookup { kind: "corpus id", name: id.to_string() })
}

/// Samples the registered function `id` at every node of `grid`.
pub fn sample(id: &str, grid: Arc<Grid>) -> Result<GridFunction> {
    get(id)?.sample(grid)
}
