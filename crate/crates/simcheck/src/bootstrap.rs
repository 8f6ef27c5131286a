//! Wild-bootstrap calibration of the check statistics.
//!
//! Both tests are one-sided and their null distributions are poorly
//! approximated by the normal limit at practical sample sizes, so critical
//! values come from multiplier bootstrap replicates:
//!
//! * mean check — responses are rebuilt as `fitted + multiplier * residual`
//!   around the leave-one-out index regression, the index is re-estimated
//!   on each replicate, and the statistic is recomputed in full;
//! * law check — the Gram matrix of the distribution-residual field is
//!   reweighted entrywise by `eta_i * eta_j` with the fitted index frozen,
//!   which only needs two `O(n^2)` sums per replicate.
//!
//! Multipliers are the two-point distribution with mean zero and second
//! and third moments one. Replicates run in parallel but every random
//! stream is keyed by replicate index, so results are independent of the
//! thread count.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Result, SimCheckError};
use crate::estimation::{fit_mean_from_starts, FitResult, OptimizerConfig};
use crate::geometry::IndexFrame;
use crate::kernel::KernelSpec;
use crate::rng::{child_rng, domain};
use crate::smoothers::loo_nadaraya_watson;
use crate::statistics::statistic_mean;
use crate::sums::pairwise_sum;
use rand_distr::{Distribution, StandardNormal};

/// Low multiplier value `(1 - sqrt 5)/2`.
pub const MULTIPLIER_LOW: f64 = -0.6180339887498949;
/// High multiplier value `(1 + sqrt 5)/2`.
pub const MULTIPLIER_HIGH: f64 = 1.618033988749895;
/// Probability of the low value, `(5 + sqrt 5)/10`.
pub const MULTIPLIER_LOW_PROB: f64 = 0.7236067977499790;

/// Fraction of failed replicates above which the run is flagged degraded.
const DEGRADED_FAILURE_FRACTION: f64 = 0.05;

/// Draw `n` two-point wild-bootstrap multipliers.
pub fn mammen_multipliers<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < MULTIPLIER_LOW_PROB {
                MULTIPLIER_LOW
            } else {
                MULTIPLIER_HIGH
            }
        })
        .collect()
}

/// Bootstrap settings.
#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    /// Number of replicates requested.
    pub b: usize,
    /// Nominal test level; the critical value is the
    /// `ceil((1 - alpha)(b + 1))`-th order statistic.
    pub alpha: f64,
    /// Master seed; multiplier and refit streams are derived per replicate.
    pub seed: u64,
    /// Starts per replicate re-fit (mean check only): one warm start at the
    /// original optimum plus `refit_starts - 1` random directions.
    pub refit_starts: usize,
    /// Extra multiplier draws allowed when a replicate fails before it is
    /// abandoned.
    pub redraw_limit: usize,
    /// Replace every multiplier by one (collapses each replicate onto the
    /// observed statistic); a calibration hook for tests, never for
    /// inference.
    pub identity_multipliers: bool,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            b: 499,
            alpha: 0.10,
            seed: 0,
            refit_starts: 2,
            redraw_limit: 3,
            identity_multipliers: false,
        }
    }
}

impl BootstrapOptions {
    fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(SimCheckError::InvalidConfig {
                reason: "bootstrap needs at least one replicate".to_string(),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SimCheckError::InvalidConfig {
                reason: format!("test level must lie in (0, 1), got {}", self.alpha),
            });
        }
        if self.refit_starts == 0 {
            return Err(SimCheckError::InvalidConfig {
                reason: "replicate re-fit needs at least one start".to_string(),
            });
        }
        Ok(())
    }

    fn multiplier_stride(&self) -> u64 {
        self.redraw_limit as u64 + 1
    }
}

/// Calibration output.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Replicate statistics in replicate order (failed replicates omitted).
    pub replicate_stats: Vec<f64>,
    /// Order-statistic critical value at the configured level.
    pub critical_value: f64,
    /// `(1 + #{t* >= t_n}) / (b_effective + 1)`.
    pub p_value: f64,
    /// Observed statistic the p-value was computed against.
    pub observed_t: f64,
    /// Replicates requested.
    pub b_requested: usize,
    /// Replicates that produced a statistic.
    pub b_effective: usize,
    /// Nominal level.
    pub alpha: f64,
    /// Master seed used.
    pub seed: u64,
    /// Replicates abandoned after exhausting redraws.
    pub failed_replicates: usize,
    /// True when more than five percent of replicates failed; the critical
    /// value is then unreliable.
    pub degraded: bool,
}

impl BootstrapResult {
    /// One-sided rejection at the configured level.
    pub fn rejects(&self) -> bool {
        self.observed_t > self.critical_value
    }
}

/// Calibrate the mean check: rebuild responses around the leave-one-out
/// index regression at the fitted coefficients, re-estimate the index on
/// every replicate (warm start plus random starts), and recompute the full
/// statistic with the testing bandwidth `h` held fixed.
///
/// `y` and `x_tilde` are the data the original fit was produced from (in
/// standardized coordinates) and `fit` is that original fit.
pub fn bootstrap_mean(
    y: ArrayView1<f64>,
    x_tilde: ArrayView2<f64>,
    fit: &FitResult,
    observed_t: f64,
    h: f64,
    optimizer: &OptimizerConfig,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    let mut out = bootstrap_mean_grid(y, x_tilde, fit, &[observed_t], &[h], optimizer, opts)?;
    Ok(out.pop().expect("one bandwidth in, one result out"))
}

/// [`bootstrap_mean`] over a grid of testing bandwidths sharing one set of
/// replicates: the expensive per-replicate re-fit is done once and the
/// statistic is then evaluated at every `h`, which is how bandwidth-grid
/// simulation studies stay affordable. `observed_ts[k]` must be the
/// observed statistic at `hs[k]`. A replicate that fails at any bandwidth
/// is redrawn (and eventually abandoned) for all of them, keeping the
/// replicate sets aligned across the grid.
pub fn bootstrap_mean_grid(
    y: ArrayView1<f64>,
    x_tilde: ArrayView2<f64>,
    fit: &FitResult,
    observed_ts: &[f64],
    hs: &[f64],
    optimizer: &OptimizerConfig,
    opts: &BootstrapOptions,
) -> Result<Vec<BootstrapResult>> {
    opts.validate()?;
    if hs.is_empty() || hs.len() != observed_ts.len() {
        return Err(SimCheckError::InvalidConfig {
            reason: format!(
                "bandwidth grid ({}) and observed statistics ({}) must pair up and be non-empty",
                hs.len(),
                observed_ts.len()
            ),
        });
    }
    let n = y.len();
    if x_tilde.nrows() != n {
        return Err(SimCheckError::DimensionMismatch {
            context: "bootstrap responses",
            expected: x_tilde.nrows(),
            got: n,
        });
    }
    let p = x_tilde.ncols();

    // Center of the resampling scheme: the leave-one-out regression on the
    // fitted raw index (bandwidth carried in the coefficient norm).
    let beta_raw = fit.raw_beta();
    let t_index = x_tilde.dot(&beta_raw);
    let smoothing = KernelSpec::smoothing();
    let fitted = loo_nadaraya_watson(y, t_index.view(), &smoothing)?.values;
    let residuals: Array1<f64> = &y.to_owned() - &fitted;

    let refit_cfg = OptimizerConfig {
        starts: opts.refit_starts,
        ..optimizer.clone()
    };
    let testing = KernelSpec::testing();
    let stride = opts.multiplier_stride();

    let raw: Vec<Option<Vec<f64>>> = (0..opts.b as u64)
        .into_par_iter()
        .map(|b| {
            'attempts: for attempt in 0..=opts.redraw_limit as u64 {
                let eta = if opts.identity_multipliers {
                    vec![1.0; n]
                } else {
                    let mut rng =
                        child_rng(opts.seed, domain::BOOT_MULTIPLIERS, b * stride + attempt);
                    mammen_multipliers(n, &mut rng)
                };
                let y_star =
                    Array1::from_iter((0..n).map(|i| fitted[i] + eta[i] * residuals[i]));

                let mut starts = Vec::with_capacity(opts.refit_starts);
                starts.push(beta_raw.clone());
                for j in 1..opts.refit_starts {
                    let mut rng =
                        child_rng(opts.seed, domain::BOOT_FIT, b * 8 + (j as u64 - 1));
                    let mut v: Array1<f64> = Array1::from_iter((0..p).map(|_| {
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                    }));
                    let norm = v.dot(&v).sqrt();
                    if norm == 0.0 {
                        v[0] = 1.0;
                    } else {
                        v *= fit.raw_norm / norm;
                    }
                    starts.push(v);
                }

                let refit =
                    match fit_mean_from_starts(y_star.view(), x_tilde, &starts, &refit_cfg) {
                        Ok(r) => r,
                        Err(_) => continue 'attempts,
                    };
                let frame = IndexFrame::new(refit.direction.clone());
                let ds = match Dataset::new(y_star.clone(), x_tilde.to_owned()) {
                    Ok(d) => d,
                    Err(_) => continue 'attempts,
                };
                let mut ts = Vec::with_capacity(hs.len());
                for &h in hs {
                    match statistic_mean(&ds, &frame, refit.bandwidth_g, h, &smoothing, &testing)
                    {
                        Ok(out) if out.t_n.is_finite() => ts.push(out.t_n),
                        _ => continue 'attempts,
                    }
                }
                return Some(ts);
            }
            None
        })
        .collect();

    (0..hs.len())
        .map(|k| {
            let column: Vec<Option<f64>> =
                raw.iter().map(|r| r.as_ref().map(|ts| ts[k])).collect();
            summarize(column, observed_ts[k], opts)
        })
        .collect()
}

/// Calibrate the law check with the fitted index frozen: the replicate
/// statistic reweights the Gram matrix entrywise by `eta_i * eta_j`, so
/// the kernel products are folded into two fixed matrices up front and
/// each replicate costs two quadratic forms.
///
/// `gram`, `z` and `w` must come from the observed statistic's pipeline
/// (Gram of the distribution-residual field, index values, complement
/// projections), with `h` the same testing bandwidth.
pub fn bootstrap_law(
    gram: ArrayView2<f64>,
    z: ArrayView1<f64>,
    w: ArrayView2<f64>,
    h: f64,
    observed_t: f64,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    opts.validate()?;
    let n = z.len();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(SimCheckError::DimensionMismatch {
            context: "bootstrap gram",
            expected: n * n,
            got: gram.nrows() * gram.ncols(),
        });
    }
    if w.nrows() != n {
        return Err(SimCheckError::DimensionMismatch {
            context: "bootstrap complement rows",
            expected: n,
            got: w.nrows(),
        });
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(SimCheckError::InvalidBandwidth { value: h });
    }
    if n < 2 {
        return Err(SimCheckError::SampleTooSmall { n, min: 2 });
    }

    // m[i][j] = G_ij K_ij phi_ij for i != j, zero on the diagonal.
    let mut m = Array2::<f64>::zeros((n, n));
    let mut m_sq = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let k = crate::kernel::gaussian((z[i] - z[j]) / h);
            let mut wsq = 0.0;
            for c in 0..w.ncols() {
                let d = w[[i, c]] - w[[j, c]];
                wsq += d * d;
            }
            let phi = crate::kernel::phi_from_sq(wsq);
            let val = gram[[i, j]] * k * phi;
            m[[i, j]] = val;
            m[[j, i]] = val;
            m_sq[[i, j]] = val * val;
            m_sq[[j, i]] = val * val;
        }
    }

    let nf = n as f64;
    let i_scale = 1.0 / (nf * (nf - 1.0) * h);
    let v_scale = 2.0 / (nf * nf * (nf - 1.0) * (nf - 1.0) * h * h);
    let stride = opts.multiplier_stride();

    let raw: Vec<Option<f64>> = (0..opts.b as u64)
        .into_par_iter()
        .map(|b| {
            let mut row_i = vec![0.0f64; n];
            let mut row_v = vec![0.0f64; n];
            for attempt in 0..=opts.redraw_limit as u64 {
                let eta = if opts.identity_multipliers {
                    vec![1.0; n]
                } else {
                    let mut rng =
                        child_rng(opts.seed, domain::BOOT_MULTIPLIERS, b * stride + attempt);
                    mammen_multipliers(n, &mut rng)
                };
                // I* ~ sum_{i != j} eta_i eta_j m_ij; the diagonal of `m`
                // is zero so full matrix-vector products are exact.
                for i in 0..n {
                    let mut acc_i = 0.0;
                    let mut acc_v = 0.0;
                    let ei = eta[i];
                    for j in 0..n {
                        acc_i += eta[j] * m[[i, j]];
                        acc_v += eta[j] * eta[j] * m_sq[[i, j]];
                    }
                    row_i[i] = ei * acc_i;
                    row_v[i] = ei * ei * acc_v;
                }
                let i_star = pairwise_sum(&row_i) * i_scale;
                let v_sq = pairwise_sum(&row_v) * v_scale;
                if v_sq > 0.0 {
                    let t = i_star / v_sq.sqrt();
                    if t.is_finite() {
                        return Some(t);
                    }
                }
            }
            None
        })
        .collect();

    summarize(raw, observed_t, opts)
}

/// Order statistics, p-value and failure accounting shared by both tests.
fn summarize(
    raw: Vec<Option<f64>>,
    observed_t: f64,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    let b_requested = raw.len();
    let replicate_stats: Vec<f64> = raw.iter().copied().flatten().collect();
    let failed = b_requested - replicate_stats.len();
    let b_effective = replicate_stats.len();
    if b_effective == 0 {
        return Err(SimCheckError::EstimationFailed {
            reason: "every bootstrap replicate failed".to_string(),
        });
    }

    let mut sorted = replicate_stats.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((1.0 - opts.alpha) * (b_effective as f64 + 1.0)).ceil() as usize;
    let rank = rank.clamp(1, b_effective);
    let critical_value = sorted[rank - 1];

    let exceed = replicate_stats
        .iter()
        .filter(|&&t| t >= observed_t)
        .count();
    let p_value = (1.0 + exceed as f64) / (b_effective as f64 + 1.0);

    Ok(BootstrapResult {
        replicate_stats,
        critical_value,
        p_value,
        observed_t,
        b_requested,
        b_effective,
        alpha: opts.alpha,
        seed: opts.seed,
        failed_replicates: failed,
        degraded: failed as f64 > DEGRADED_FAILURE_FRACTION * b_requested as f64,
    })
}
