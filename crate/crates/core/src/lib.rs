//! Discrete laboratory for the fine properties of Sobolev functions.
//!
//! Everything here works on samples of analytic test functions over uniform
//! lattices: ball averages and precise representatives, `L_p`-points and
//! refined gradients, the standard mollifier, variational `p`-capacity,
//! Hausdorff pre-measure coverings, difference quotients, `L_p`-approximate
//! differentials and Taylor remainders. Each of the limiting statements
//! (`r -> 0`, `t -> 0`, `h -> 0`) is turned into a finite schedule and a
//! [`ConvergenceReport`] or [`PointClassification`] verdict.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![warn(missing_docs)]

extern crate alloc;

pub mod capacity;
pub mod convergence;
pub mod corpus;
pub mod differentiability;
pub mod error;
pub mod grid;
pub mod hausdorff;
pub mod linalg;
pub mod mollify;
pub mod quadrature;
pub mod representative;
pub mod special;
pub mod taylor;

pub use convergence::{ConvergenceCriteria, ConvergenceReport, Verdict};
pub use error::{Error, Result};
pub use grid::{Field, Grid, GridFunction, Region, VectorField};
pub use representative::{PointClassification, PointVerdict, RadiusSchedule};
