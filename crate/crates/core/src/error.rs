//! Error type shared by every module.

use alloc::boxed::Box;
use alloc::string::String;

use crate::capacity::CapacityEstimate;

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A name that is not registered (corpus id, study kind, ...).
    #[error("unknown {kind} `{name}`")]
    Lookup {
        /// What was being looked up.
        kind: &'static str,
        /// The offending name.
        name: String,
    },
    /// Geometry or argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The lattice is too coarse for the requested operation.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// A hypothesis of the operation is not met at the requested point.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Quadrature, regression or iteration failed numerically.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The capacity optimizer hit its iteration cap; carries the best iterate.
    #[error(
        "capacity optimizer did not converge after {} iterations (projected gradient {:e})",
        .0.iterations, .0.projected_gradient
    )]
    CapacityNotConverged(Box<CapacityEstimate>),
}

/// Result alias for the core crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(alloc::format!($($arg)*)) };
}
macro_rules! numeric {
    ($($arg:tt)*) => { $crate::error::Error::Numeric(alloc::format!($($arg)*)) };
}
pub(crate) use domain;
pub(crate) use numeric;
