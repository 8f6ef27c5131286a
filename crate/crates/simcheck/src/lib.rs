//! Specification checks for single-index models.
//!
//! A single-index model summarizes a covariate vector `X` through one linear
//! combination `X'beta`. This crate tests two versions of that assumption for
//! a scalar response `Y`:
//!
//! * **mean check** — `E[Y | X] = E[Y | X'beta]`, and
//! * **law check** — the whole conditional distribution of `Y` given `X`
//!   depends on `X` only through `X'beta`.
//!
//! Both checks build a kernel-smoothed residual field along the fitted index,
//! aggregate it into a second-order U-statistic that weights pairs by their
//! distance in the directions orthogonal to the index, and studentize. The
//! resulting statistic is asymptotically standard normal under the null; a
//! wild / multiplier bootstrap provides finite-sample critical values.
//!
//! The crate also ships the index estimators the checks are built around
//! (semiparametric least squares for the mean, a rank-based pseudo-likelihood
//! for the law) and a Monte Carlo harness for level and power studies.
//!
//! Everything is deterministic given a seed: random draws come from
//! counter-derived child streams, and floating-point reductions use a fixed
//! pairwise tree, so results do not depend on thread count.

pub mod bootstrap;
pub mod dataset;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod optim;
pub mod rng;
pub mod runner;
pub mod smoothers;
pub mod statistics;
pub mod sums;

pub use dataset::Dataset;
pub use error::{Result, SimCheckError};
pub use geometry::{Direction, IndexFrame};
pub use kernel::KernelSpec;
pub use statistics::StatisticOutput;
