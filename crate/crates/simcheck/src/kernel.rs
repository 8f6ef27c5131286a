//! Kernel functions for smoothing and for the test weighting.
//!
//! Both roles use the standard Gaussian density. Kernels here are always
//! evaluated on already-scaled arguments: bandwidth division and any
//! `1/bandwidth` normalization happen at the call sites, never inside the
//! kernel itself. The pair weight [`eval_phi`] applied to the orthogonal
//! coordinates is a fixed bounded function with no bandwidth at all; its
//! Fourier transform is positive, which is what makes the quadratic
//! statistics one-sided.

use crate::error::{Result, SimCheckError};

/// Value of the standard Gaussian density at zero, `1/sqrt(2*pi)`.
pub const GAUSSIAN_AT_ZERO: f64 = 0.3989422804014327;

/// Kernel family. Only the standard Gaussian density is provided; it
/// integrates to one, is symmetric, and has a strictly positive Fourier
/// transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    GaussianDensity,
}

/// Where a kernel is used: `Smoothing` for the residual fields and the
/// index estimators (the `L` role), `Testing` for the pair weighting inside
/// the quadratic statistics (the `K` role).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPurpose {
    Smoothing,
    Testing,
}

/// A kernel choice tagged with its role. The tag is bookkeeping for reports
/// and configuration; evaluation depends only on the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub purpose: KernelPurpose,
}

impl KernelSpec {
    /// Gaussian smoothing kernel (the `L` role).
    pub fn smoothing() -> Self {
        KernelSpec {
            family: KernelFamily::GaussianDensity,
            purpose: KernelPurpose::Smoothing,
        }
    }

    /// Gaussian testing kernel (the `K` role).
    pub fn testing() -> Self {
        KernelSpec {
            family: KernelFamily::GaussianDensity,
            purpose: KernelPurpose::Testing,
        }
    }

    /// Evaluate the kernel at an already-scaled argument.
    pub fn eval(&self, u: f64) -> Result<f64> {
        eval_kernel(self, u)
    }
}

/// Evaluate `spec`'s kernel at `u`. Errors on non-finite input.
pub fn eval_kernel(spec: &KernelSpec, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(SimCheckError::NonFinite {
            context: "kernel argument".to_string(),
        });
    }
    match spec.family {
        KernelFamily::GaussianDensity => Ok(gaussian(u)),
    }
}

/// Pair weight on the orthogonal coordinates: `exp(-|w|^2 / 2)` for a slice
/// `w` of length `p - 1` (an empty slice gives 1). Errors on non-finite
/// input.
pub fn eval_phi(w: &[f64]) -> Result<f64> {
    let mut sq = 0.0;
    for &v in w {
        if !v.is_finite() {
            return Err(SimCheckError::NonFinite {
                context: "pair weight argument".to_string(),
            });
        }
        sq += v * v;
    }
    Ok((-0.5 * sq).exp())
}

/// Unchecked standard Gaussian density, used on hot paths where arguments
/// are already known to be finite.
#[inline(always)]
pub(crate) fn gaussian(u: f64) -> f64 {
    GAUSSIAN_AT_ZERO * (-0.5 * u * u).exp()
}

/// Unchecked pair weight `exp(-squared_distance / 2)` from a precomputed
/// squared distance.
#[inline(always)]
pub(crate) fn phi_from_sq(sq: f64) -> f64 {
    (-0.5 * sq).exp()
}
