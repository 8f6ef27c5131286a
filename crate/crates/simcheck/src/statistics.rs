//! Studentized quadratic test statistics.
//!
//! Given per-observation residual objects `U_i` (scalars for the mean
//! check, step functions for the law check) with pairwise inner products
//! `inner[i][j] = <U_i, U_j>`, the statistic aggregates them over pairs,
//! weighting by a kernel in the index coordinate and a fixed positive
//! weight in the orthogonal coordinates:
//!
//! ```text
//! I_n = 1/(n(n-1)h)      * sum_{i != j} inner[i][j] K((Z_i-Z_j)/h) phi(W_i - W_j)
//! v_n^2 = 2/(n^2(n-1)^2 h^2) * sum_{i != j} (same term)^2
//! T_n = I_n / v_n
//! ```
//!
//! Under the null `T_n` is asymptotically standard normal and the test
//! rejects for large positive values. Because the kernel and the pair
//! weight both have positive Fourier transforms, the population version of
//! `I_n` is nonnegative, which is what makes the one-sided decision valid.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::dataset::Dataset;
use crate::error::{Result, SimCheckError};
use crate::geometry::{project, IndexFrame};
use crate::kernel::{gaussian, phi_from_sq, KernelFamily, KernelSpec};
use crate::smoothers::{compute_ranks, law_gram, residual_field_law, residual_field_mean};
use crate::sums::pairwise_sum;

/// A studentized statistic with its ingredients.
#[derive(Debug, Clone, Copy)]
pub struct StatisticOutput {
    /// Kernel-weighted quadratic numerator.
    pub i_n: f64,
    /// Studentizing scale (square root of the variance estimate).
    pub v_n: f64,
    /// `i_n / v_n`, compared against standard normal quantiles.
    pub t_n: f64,
    /// Sample size.
    pub n: usize,
    /// Testing bandwidth the pair kernel was evaluated at.
    pub h: f64,
}

/// Aggregate pairwise inner products into the studentized statistic.
///
/// `inner` must be symmetric (only its super-diagonal triangle is read) and
/// its diagonal is ignored. Errors when the variance estimate is exactly
/// zero, i.e. when every off-diagonal inner product vanishes; the error
/// carries the (then necessarily zero) numerator.
pub fn quadratic_form(
    inner: ArrayView2<f64>,
    z: ArrayView1<f64>,
    w: ArrayView2<f64>,
    h: f64,
    kernel: &KernelSpec,
) -> Result<StatisticOutput> {
    let n = check_quadratic_inputs(inner, z, w, h)?;
    let KernelFamily::GaussianDensity = kernel.family;

    // Upper-triangle terms m_ij = inner * K * phi; the full ordered-pair
    // sums are exactly twice the triangle sums because every factor is
    // symmetric in (i, j).
    let mut row_i = Vec::with_capacity(n - 1);
    let mut row_v = Vec::with_capacity(n - 1);
    let mut buf = Vec::with_capacity(n);
    let mut buf_sq = Vec::with_capacity(n);
    for i in 0..(n - 1) {
        buf.clear();
        buf_sq.clear();
        for j in (i + 1)..n {
            let k_ij = gaussian((z[i] - z[j]) / h);
            let mut sq = 0.0;
            for d in 0..w.ncols() {
                let diff = w[[i, d]] - w[[j, d]];
                sq += diff * diff;
            }
            let term = inner[[i, j]] * k_ij * phi_from_sq(sq);
            buf.push(term);
            buf_sq.push(term * term);
        }
        row_i.push(pairwise_sum(&buf));
        row_v.push(pairwise_sum(&buf_sq));
    }
    let nf = n as f64;
    let i_sum = 2.0 * pairwise_sum(&row_i);
    let v_sum = 2.0 * pairwise_sum(&row_v);
    let i_n = i_sum / (nf * (nf - 1.0) * h);
    if v_sum == 0.0 {
        return Err(SimCheckError::DegenerateStatistic { i_n });
    }
    let v_n = (2.0 * v_sum / (nf * nf * (nf - 1.0) * (nf - 1.0) * h * h)).sqrt();
    Ok(StatisticOutput {
        i_n,
        v_n,
        t_n: i_n / v_n,
        n,
        h,
    })
}

/// Mean-check statistic: project onto the frame, smooth the response
/// differences along the index with bandwidth `g`, and aggregate the
/// products of smoothed residuals with testing bandwidth `h`.
pub fn statistic_mean(
    dataset: &Dataset,
    frame: &IndexFrame,
    g: f64,
    h: f64,
    smoothing: &KernelSpec,
    testing: &KernelSpec,
) -> Result<StatisticOutput> {
    let (z, w) = project(dataset.x().view(), frame)?;
    let field = residual_field_mean(dataset.y().view(), z.view(), g, smoothing)?;
    let v = &field.values;
    let n = v.len();
    let mut inner = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            inner[[i, j]] = v[i] * v[j];
        }
    }
    quadratic_form(inner.view(), z.view(), w.view(), h, testing)
}

/// Law-check statistic: rank the responses, smooth the indicator
/// differences along the index with bandwidth `g`, form the exact
/// `L2[0, 1]` Gram matrix of the resulting step functions, and aggregate
/// with testing bandwidth `h`.
pub fn statistic_law(
    dataset: &Dataset,
    frame: &IndexFrame,
    g: f64,
    h: f64,
    smoothing: &KernelSpec,
    testing: &KernelSpec,
) -> Result<StatisticOutput> {
    let (z, w) = project(dataset.x().view(), frame)?;
    let ranks = compute_ranks(dataset.y().view())?;
    let field = residual_field_law(&ranks, z.view(), g, smoothing)?;
    let gram = law_gram(&field);
    quadratic_form(gram.view(), z.view(), w.view(), h, testing)
}

/// Diagnostic full quadratic form including the diagonal:
/// `sum_{i,j} inner[i][j] K((Z_i-Z_j)/h) phi(W_i-W_j)`, unscaled.
///
/// When `inner` is a Gram matrix this is a quadratic form in a positive
/// definite pair weight and must be nonnegative up to rounding; it is a
/// numerical sanity check, not part of the test decision.
pub fn full_quadratic_psd_check(
    inner: ArrayView2<f64>,
    z: ArrayView1<f64>,
    w: ArrayView2<f64>,
    h: f64,
    kernel: &KernelSpec,
) -> Result<f64> {
    let n = check_quadratic_inputs(inner, z, w, h)?;
    let KernelFamily::GaussianDensity = kernel.family;
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        diag.push(inner[[i, i]] * gaussian(0.0));
    }
    let mut rows = Vec::with_capacity(n - 1);
    let mut buf = Vec::with_capacity(n);
    for i in 0..(n - 1) {
        buf.clear();
        for j in (i + 1)..n {
            let k_ij = gaussian((z[i] - z[j]) / h);
            let mut sq = 0.0;
            for d in 0..w.ncols() {
                let diff = w[[i, d]] - w[[j, d]];
                sq += diff * diff;
            }
            buf.push(inner[[i, j]] * k_ij * phi_from_sq(sq));
        }
        rows.push(pairwise_sum(&buf));
    }
    Ok(pairwise_sum(&diag) + 2.0 * pairwise_sum(&rows))
}

/// Standard normal CDF via the complementary error function (statrs's
/// rational approximation; absolute error well below 1e-10 everywhere).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, used for asymptotic critical values.
pub fn normal_quantile(prob: f64) -> Result<f64> {
    if !(0.0 < prob && prob < 1.0) {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("normal quantile needs a probability in (0, 1), got {prob}"),
        });
    }
    Ok(statrs::function::erf::erfc_inv(2.0 * (1.0 - prob)) * std::f64::consts::SQRT_2)
}

/// One-sided asymptotic p-value `1 - Phi(t_n)`.
pub fn asymptotic_p_value(t_n: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(t_n / std::f64::consts::SQRT_2)
}

/// Kolmogorov-Smirnov distance between a sample's empirical CDF and the
/// standard normal: `sup_x |F_n(x) - Phi(x)|`, evaluated exactly by
/// checking both one-sided gaps at every order statistic.
pub fn ks_distance_standard_normal(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(SimCheckError::SampleTooSmall { n: 0, min: 1 });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(SimCheckError::NonFinite {
            context: "KS distance sample".to_string(),
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut dist: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let phi = normal_cdf(x);
        let upper = (i as f64 + 1.0) / n - phi;
        let lower = phi - i as f64 / n;
        dist = dist.max(upper).max(lower);
    }
    Ok(dist)
}

fn check_quadratic_inputs(
    inner: ArrayView2<f64>,
    z: ArrayView1<f64>,
    w: ArrayView2<f64>,
    h: f64,
) -> Result<usize> {
    let n = z.len();
    if n < 2 {
        return Err(SimCheckError::SampleTooSmall { n, min: 2 });
    }
    if inner.nrows() != n || inner.ncols() != n {
        return Err(SimCheckError::DimensionMismatch {
            context: "inner-product matrix",
            expected: n,
            got: inner.nrows().max(inner.ncols()),
        });
    }
    if w.nrows() != n {
        return Err(SimCheckError::DimensionMismatch {
            context: "orthogonal coordinates rows",
            expected: n,
            got: w.nrows(),
        });
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(SimCheckError::InvalidBandwidth { value: h });
    }
    if z.iter().any(|v| !v.is_finite())
        || w.iter().any(|v| !v.is_finite())
        || inner.iter().any(|v| !v.is_finite())
    {
        return Err(SimCheckError::NonFinite {
            context: "quadratic form input".to_string(),
        });
    }
    Ok(n)
}
