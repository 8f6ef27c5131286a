//! Semiparametric index estimation.
//!
//! Two estimators share one pattern: covariates are scale-standardized, the
//! raw coefficient vector is left unnormalized so that its length doubles
//! as an inverse smoothing bandwidth, and a Nelder-Mead multi-start
//! minimizes a leave-one-out criterion. The reported direction is the
//! normalized coefficient vector and the smoothing bandwidth is exactly
//! `1 / |beta_raw|`.
//!
//! * Mean: leave-one-out least squares of `y` on the smoothed index
//!   regression (semiparametric least squares).
//! * Law: negated log pseudo-likelihood of the response ranks given the
//!   index, optimized jointly over the coefficient vector and (on log
//!   scale) the rank-smoothing bandwidth `g_y`.
//!
//! Both criteria are invariant to flipping the coefficient sign, so the
//! simplex search folds every candidate onto the `beta[0] > 0` half-space.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Result, SimCheckError};
use crate::geometry::{normalize_direction, Direction};
use crate::kernel::{gaussian, KernelFamily, KernelSpec};
use crate::optim::{minimize, NelderMeadConfig, NelderMeadResult};
use crate::rng::{child_rng, domain};
use crate::smoothers::DENOMINATOR_FLOOR;
use rand_distr::{Distribution, StandardNormal};

/// Norms the random multi-start directions are scaled to, cycled in order.
const START_NORMS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Multi-start and simplex settings for the index estimators.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Number of starts: the least-squares direction plus `starts - 1`
    /// random unit vectors scaled to [`START_NORMS`].
    pub starts: usize,
    /// Objective evaluation budget per start.
    pub max_evals: usize,
    /// Simplex objective-spread stopping tolerance.
    pub spread_tol: f64,
    /// Master seed for the random starts.
    pub seed: u64,
    /// Initial rank-smoothing bandwidth for the law estimator.
    pub gy_start: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            starts: 5,
            max_evals: 2000,
            spread_tol: 1e-8,
            seed: 0,
            gy_start: 0.1,
        }
    }
}

impl OptimizerConfig {
    fn nm_config(&self) -> NelderMeadConfig {
        NelderMeadConfig {
            max_evals: self.max_evals,
            spread_tol: self.spread_tol,
            ..NelderMeadConfig::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(SimCheckError::InvalidConfig {
                reason: "optimizer needs at least one start".to_string(),
            });
        }
        if !(self.gy_start.is_finite() && self.gy_start > 0.0) {
            return Err(SimCheckError::InvalidConfig {
                reason: format!("gy_start must be positive, got {}", self.gy_start),
            });
        }
        Ok(())
    }
}

/// A fitted index.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Unit direction with positive first coefficient, in the coordinates
    /// of the standardized covariates.
    pub direction: Direction,
    /// Norm of the unnormalized coefficient vector.
    pub raw_norm: f64,
    /// Index smoothing bandwidth, exactly `1 / raw_norm`.
    pub bandwidth_g: f64,
    /// Criterion value at the optimum.
    pub objective: f64,
    /// Total objective evaluations across all starts.
    pub optimizer_evals: usize,
    /// Whether the winning start met the spread tolerance.
    pub converged: bool,
    /// Rank-smoothing bandwidth (law estimator only).
    pub gy: Option<f64>,
    /// Leave-one-out denominators that fell back to the sample mean in the
    /// mean criterion, evaluated at the optimum.
    pub nw_fallbacks: usize,
    /// Pseudo-likelihood density estimates floored at the optimum (law
    /// estimator only).
    pub density_floors: usize,
    /// True when `bandwidth_g` falls outside the supported range for this
    /// sample size (see [`bandwidth_in_supported_range`]); a diagnostic,
    /// never an override.
    pub bandwidth_warning: bool,
}

impl FitResult {
    /// The unnormalized coefficient vector `raw_norm * direction`.
    pub fn raw_beta(&self) -> Array1<f64> {
        self.direction.beta().to_owned() * self.raw_norm
    }
}

/// Divide each covariate column by its root-mean-square deviation about the
/// column mean (no centering). Returns the standardized matrix and the
/// per-column scales. Errors on a constant column, naming it.
pub fn standardize_covariates(x: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = x.nrows();
    if n < 2 {
        return Err(SimCheckError::SampleTooSmall { n, min: 2 });
    }
    let mut scales = Array1::<f64>::zeros(x.ncols());
    let mut out = x.to_owned();
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let msd = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let scale = msd.sqrt();
        if scale <= 0.0 || !scale.is_finite() {
            return Err(SimCheckError::ConstantCovariate {
                column: format!("x{}", j + 1),
            });
        }
        scales[j] = scale;
        out.column_mut(j).mapv_inplace(|v| v / scale);
    }
    Ok((out, scales))
}

/// Whether a fitted index bandwidth `g` is inside the supported range
/// `[0.1 n^{-1/4}, 10 n^{-1/5}]` for sample size `n`. Outside this range
/// the asymptotic approximation degrades; callers warn but never override.
pub fn bandwidth_in_supported_range(g: f64, n: usize) -> bool {
    let nf = n as f64;
    let lo = 0.1 * nf.powf(-0.25);
    let hi = 10.0 * nf.powf(-0.2);
    g >= lo && g <= hi
}

/// Semiparametric least-squares criterion: the sum of squared leave-one-out
/// prediction errors of `y` from the kernel regression on the raw index
/// `x_tilde * beta_raw`. The coefficient vector carries the bandwidth in
/// its norm, so the kernel is applied to raw index differences.
pub fn sls_objective(
    beta_raw: ArrayView1<f64>,
    y: ArrayView1<f64>,
    x_tilde: ArrayView2<f64>,
    kernel: &KernelSpec,
) -> Result<f64> {
    let KernelFamily::GaussianDensity = kernel.family;
    check_fit_inputs(beta_raw.len(), y, x_tilde)?;
    let mut scratch = MeanScratch::new(y.len());
    let t = x_tilde.dot(&beta_raw);
    Ok(scratch.eval(t.as_slice().expect("contiguous"), y.as_slice().expect("contiguous")))
}

/// Negated rank pseudo-log-likelihood of the responses given the index.
///
/// For each observation the conditional density of the normalized rank at
/// `R_i/n` is estimated by a leave-one-out kernel ratio with rank bandwidth
/// `g_y`; the criterion is minus the sum of log densities, so smaller is
/// better. Density estimates below `1e-30` are floored (they would
/// otherwise produce infinite logs); see [`law_objective_diagnostics`] for
/// the floor count.
pub fn law_objective(
    beta_raw: ArrayView1<f64>,
    g_y: f64,
    ranks: &[usize],
    x_tilde: ArrayView2<f64>,
    kernel: &KernelSpec,
) -> Result<f64> {
    law_objective_diagnostics(beta_raw, g_y, ranks, x_tilde, kernel).map(|(v, _)| v)
}

/// [`law_objective`] together with the number of floored density estimates.
pub fn law_objective_diagnostics(
    beta_raw: ArrayView1<f64>,
    g_y: f64,
    ranks: &[usize],
    x_tilde: ArrayView2<f64>,
    kernel: &KernelSpec,
) -> Result<(f64, usize)> {
    let KernelFamily::GaussianDensity = kernel.family;
    if ranks.len() != x_tilde.nrows() {
        return Err(SimCheckError::DimensionMismatch {
            context: "law objective ranks",
            expected: x_tilde.nrows(),
            got: ranks.len(),
        });
    }
    if !(g_y.is_finite() && g_y > 0.0) {
        return Err(SimCheckError::InvalidBandwidth { value: g_y });
    }
    if x_tilde.ncols() != beta_raw.len() {
        return Err(SimCheckError::DimensionMismatch {
            context: "coefficient length",
            expected: x_tilde.ncols(),
            got: beta_raw.len(),
        });
    }
    if x_tilde.nrows() < 3 {
        return Err(SimCheckError::SampleTooSmall {
            n: x_tilde.nrows(),
            min: 3,
        });
    }
    let mut scratch = LawScratch::new(ranks);
    let t = x_tilde.dot(&beta_raw);
    Ok(scratch.eval_with_floors(t.as_slice().expect("contiguous"), g_y))
}

/// Fit the mean-check index on a raw dataset: standardize, then run the
/// multi-start search. See [`fit_mean_on_standardized`].
pub fn estimate_index_mean(
    dataset: &crate::dataset::Dataset,
    cfg: &OptimizerConfig,
) -> Result<FitResult> {
    let (x_tilde, _) = standardize_covariates(dataset.x().view())?;
    fit_mean_on_standardized(dataset.y().view(), x_tilde.view(), cfg)
}

/// Fit the law-check index on a raw dataset: standardize, rank, then run
/// the joint multi-start search. See [`fit_law_on_standardized`].
pub fn estimate_index_law(
    dataset: &crate::dataset::Dataset,
    cfg: &OptimizerConfig,
) -> Result<FitResult> {
    let (x_tilde, _) = standardize_covariates(dataset.x().view())?;
    fit_law_on_standardized(dataset.y().view(), x_tilde.view(), cfg)
}

/// Multi-start semiparametric least squares on standardized covariates.
pub fn fit_mean_on_standardized(
    y: ArrayView1<f64>,
    x_tilde: ArrayView2<f64>,
    cfg: &OptimizerConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let starts = build_starts(y, x_tilde, cfg);
    fit_mean_from_starts(y, x_tilde, &starts, cfg)
}

/// Mean fit from caller-chosen starting points (the bootstrap re-fits warm
/// from the original optimum with a reduced start list).
pub fn fit_mean_from_starts(
    y: ArrayView1<f64>,
    x_tilde: ArrayView2<f64>,
    starts: &[Array1<f64>],
    cfg: &OptimizerConfig,
) -> Result<FitResult> {
    check_fit_inputs(x_tilde.ncols(), y, x_tilde)?;
    if starts.is_empty() {
        return Err(SimCheckError::InvalidConfig {
            reason: "empty start list".to_string(),
        });
    }
    let n = y.len();
    let y_slice: Vec<f64> = y.iter().copied().collect();
    let mut scratch = MeanScratch::new(n);
    let nm_cfg = cfg.nm_config();

    let mut best: Option<(NelderMeadResult, usize)> = None;
    let mut total_evals = 0usize;
    for (s, x0) in starts.iter().enumerate() {
        let objective = |beta: &[f64]| {
            let beta_view = ArrayView1::from(beta);
            let t = x_tilde.dot(&beta_view);
            scratch.eval(t.as_slice().expect("contiguous"), &y_slice)
        };
        let res = minimize(objective, x0.as_slice().expect("contiguous"), &nm_cfg, flip_all);
        total_evals += res.evals;
        let better = match &best {
            None => true,
            Some((b, _)) => res.fx.total_cmp(&b.fx).is_lt(),
        };
        if better {
            best = Some((res, s));
        }
    }
    let (winner, _) = best.expect("at least one start");
    if !winner.fx.is_finite() {
        return Err(SimCheckError::EstimationFailed {
            reason: "objective non-finite at every candidate".to_string(),
        });
    }
    let beta_raw = Array1::from_vec(winner.x.clone());
    let direction = normalize_direction(beta_raw.view())?;
    let raw_norm = beta_raw.dot(&beta_raw).sqrt();
    let bandwidth_g = raw_norm.recip();

    // Diagnostics at the optimum.
    let t = x_tilde.dot(&beta_raw);
    let nw =
        crate::smoothers::loo_nadaraya_watson(y, t.view(), &KernelSpec::smoothing())?;

    Ok(FitResult {
        direction,
        raw_norm,
        bandwidth_g,
        objective: winner.fx,
        optimizer_evals: total_evals,
        converged: winner.converged,
        gy: None,
        nw_fallbacks: nw.fallback_count,
        density_floors: 0,
        bandwidth_warning: !bandwidth_in_supported_range(bandwidth_g, n),
    })
}

/// Multi-start joint fit of the law-check index and rank bandwidth; the
/// simplex works on `(beta_raw, ln g_y)`.
pub fn fit_law_on_standardized(
    y: ArrayView1<f64>,
    x_tilde: ArrayView2<f64>,
    cfg: &OptimizerConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_fit_inputs(x_tilde.ncols(), y, x_tilde)?;
    let ranks = crate::smoothers::compute_ranks(y)?;
    let n = y.len();

    // Rank-based least-squares start keeps the whole law pipeline invariant
    // to monotone response transforms.
    let rank_response = Array1::from_iter(ranks.iter().map(|&r| r as f64 / n as f64));
    let starts = build_starts(rank_response.view(), x_tilde, cfg);

    let mut scratch = LawScratch::new(&ranks);
    let nm_cfg = cfg.nm_config();
    let p = x_tilde.ncols();

    let mut best: Option<(NelderMeadResult, usize)> = None;
    let mut total_evals = 0usize;
    for (s, beta0) in starts.iter().enumerate() {
        let mut theta0: Vec<f64> = beta0.iter().copied().collect();
        theta0.push(cfg.gy_start.ln());
        let objective = |theta: &[f64]| {
            let beta_view = ArrayView1::from(&theta[..p]);
            let g_y = theta[p].exp();
            let t = x_tilde.dot(&beta_view);
            scratch.eval(t.as_slice().expect("contiguous"), g_y)
        };
        let res = minimize(objective, &theta0, &nm_cfg, flip_beta_part(p));
        total_evals += res.evals;
        let better = match &best {
            None => true,
            Some((b, _)) => res.fx.total_cmp(&b.fx).is_lt(),
        };
        if better {
            best = Some((res, s));
        }
    }
    let (winner, _) = best.expect("at least one start");
    if !winner.fx.is_finite() {
        return Err(SimCheckError::EstimationFailed {
            reason: "objective non-finite at every candidate".to_string(),
        });
    }
    let beta_raw = Array1::from_vec(winner.x[..p].to_vec());
    let g_y = winner.x[p].exp();
    let direction = normalize_direction(beta_raw.view())?;
    let raw_norm = beta_raw.dot(&beta_raw).sqrt();
    let bandwidth_g = raw_norm.recip();

    let t = x_tilde.dot(&beta_raw);
    let (_, floors) = {
        let mut diag = LawScratch::new(&ranks);
        diag.eval_with_floors(t.as_slice().expect("contiguous"), g_y)
    };

    Ok(FitResult {
        direction,
        raw_norm,
        bandwidth_g,
        objective: winner.fx,
        optimizer_evals: total_evals,
        converged: winner.converged,
        gy: Some(g_y),
        nw_fallbacks: 0,
        density_floors: floors,
        bandwidth_warning: !bandwidth_in_supported_range(bandwidth_g, n),
    })
}

/// Starting points: the least-squares slope vector of `response` on the
/// standardized covariates (with intercept, dropped), then random unit
/// vectors scaled to the cycle `0.5, 1, 2, 4`, drawn from the configured
/// seed. A degenerate least-squares system falls back to the first axis.
pub fn build_starts(
    response: ArrayView1<f64>,
    x_tilde: ArrayView2<f64>,
    cfg: &OptimizerConfig,
) -> Vec<Array1<f64>> {
    let p = x_tilde.ncols();
    let mut starts = Vec::with_capacity(cfg.starts);
    let mut ols = ols_slopes(response, x_tilde).unwrap_or_else(|| {
        let mut e1 = vec![0.0; p];
        e1[0] = 1.0;
        e1
    });
    if ols.iter().all(|v| v.abs() < 1e-12) {
        ols[0] = 1.0;
    }
    if ols[0] < 0.0 {
        for v in ols.iter_mut() {
            *v = -*v;
        }
    }
    starts.push(Array1::from_vec(ols));
    for s in 1..cfg.starts {
        let mut rng = child_rng(cfg.seed, domain::FIT_START, s as u64);
        let mut v: Array1<f64> = Array1::from_iter(
            (0..p).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
        );
        let norm = v.dot(&v).sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
        } else {
            v /= norm;
        }
        if v[0] < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        starts.push(v * START_NORMS[(s - 1) % START_NORMS.len()]);
    }
    starts
}

/// Least-squares slopes of `y` on `x` with an intercept, or `None` when the
/// normal equations are numerically singular.
fn ols_slopes(y: ArrayView1<f64>, x: ArrayView2<f64>) -> Option<Vec<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    let q = p + 1; // intercept first
    let mut ata = vec![vec![0.0f64; q]; q];
    let mut atb = vec![0.0f64; q];
    for i in 0..n {
        let mut row = Vec::with_capacity(q);
        row.push(1.0);
        row.extend(x.row(i).iter().copied());
        for a in 0..q {
            for b in a..q {
                ata[a][b] += row[a] * row[b];
            }
            atb[a] += row[a] * y[i];
        }
    }
    for a in 0..q {
        for b in 0..a {
            ata[a][b] = ata[b][a];
        }
    }
    solve_in_place(&mut ata, &mut atb).then(|| atb[1..].to_vec())
}

/// Gaussian elimination with partial pivoting; returns false on a
/// numerically singular system.
fn solve_in_place(a: &mut [Vec<f64>], b: &mut [f64]) -> bool {
    let q = b.len();
    for col in 0..q {
        let pivot = (col..q)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return false;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..q {
            let factor = a[row][col] / a[col][col];
            for c in col..q {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..q).rev() {
        let mut acc = b[col];
        for c in (col + 1)..q {
            acc -= a[col][c] * b[c];
        }
        b[col] = acc / a[col][col];
    }
    true
}

/// Sign flip onto the `beta[0] > 0` half-space (whole vector).
fn flip_all(x: &mut [f64]) {
    if x[0] < 0.0 {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
}

/// Sign flip of the leading `p` coefficients only (the trailing coordinate
/// is the log rank bandwidth, which has no sign symmetry).
fn flip_beta_part(p: usize) -> impl FnMut(&mut [f64]) {
    move |x: &mut [f64]| {
        if x[0] < 0.0 {
            for v in x[..p].iter_mut() {
                *v = -*v;
            }
        }
    }
}

fn check_fit_inputs(p: usize, y: ArrayView1<f64>, x_tilde: ArrayView2<f64>) -> Result<()> {
    if x_tilde.ncols() != p {
        return Err(SimCheckError::DimensionMismatch {
            context: "coefficient length",
            expected: x_tilde.ncols(),
            got: p,
        });
    }
    if y.len() != x_tilde.nrows() {
        return Err(SimCheckError::DimensionMismatch {
            context: "fit responses",
            expected: x_tilde.nrows(),
            got: y.len(),
        });
    }
    if y.len() < 3 {
        return Err(SimCheckError::SampleTooSmall {
            n: y.len(),
            min: 3,
        });
    }
    Ok(())
}

/// Reusable buffers for the mean criterion.
struct MeanScratch {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl MeanScratch {
    fn new(n: usize) -> Self {
        MeanScratch {
            num: vec![0.0; n],
            den: vec![0.0; n],
        }
    }

    /// Leave-one-out squared prediction error of `y` from the kernel
    /// regression on index values `t`.
    fn eval(&mut self, t: &[f64], y: &[f64]) -> f64 {
        let n = t.len();
        self.num.iter_mut().for_each(|v| *v = 0.0);
        self.den.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let (ti, yi) = (t[i], y[i]);
            for k in (i + 1)..n {
                let w = gaussian(ti - t[k]);
                self.num[i] += w * y[k];
                self.num[k] += w * yi;
                self.den[i] += w;
                self.den[k] += w;
            }
        }
        let mut y_total = 0.0;
        for &v in y {
            y_total += v;
        }
        let mut sse = 0.0;
        for i in 0..n {
            let fitted = if self.den[i] < DENOMINATOR_FLOOR {
                (y_total - y[i]) / (n - 1) as f64
            } else {
                self.num[i] / self.den[i]
            };
            let e = y[i] - fitted;
            sse += e * e;
        }
        sse
    }
}

/// Reusable buffers for the law criterion.
struct LawScratch {
    ranks: Vec<f64>,
    num: Vec<f64>,
    den: Vec<f64>,
}

impl LawScratch {
    fn new(ranks: &[usize]) -> Self {
        LawScratch {
            ranks: ranks.iter().map(|&r| r as f64).collect(),
            num: vec![0.0; ranks.len()],
            den: vec![0.0; ranks.len()],
        }
    }

    fn eval(&mut self, t: &[f64], g_y: f64) -> f64 {
        self.eval_with_floors(t, g_y).0
    }

    /// Negated log pseudo-likelihood and the number of floored densities.
    fn eval_with_floors(&mut self, t: &[f64], g_y: f64) -> (f64, usize) {
        let n = t.len();
        if !(g_y.is_finite() && g_y > 0.0) {
            return (f64::INFINITY, 0);
        }
        self.num.iter_mut().for_each(|v| *v = 0.0);
        self.den.iter_mut().for_each(|v| *v = 0.0);
        let rank_scale = 1.0 / (n as f64 * g_y);
        for i in 0..n {
            let (ti, ri) = (t[i], self.ranks[i]);
            for k in (i + 1)..n {
                let lw = gaussian(ti - t[k]);
                let rk = gaussian((ri - self.ranks[k]) * rank_scale) / g_y;
                self.num[i] += rk * lw;
                self.num[k] += rk * lw;
                self.den[i] += lw;
                self.den[k] += lw;
            }
        }
        let mut neg_loglik = 0.0;
        let mut floors = 0usize;
        for i in 0..n {
            let density = if self.den[i] < DENOMINATOR_FLOOR {
                floors += 1;
                DENOMINATOR_FLOOR
            } else {
                let d = self.num[i] / self.den[i];
                if d < DENOMINATOR_FLOOR {
                    floors += 1;
                    DENOMINATOR_FLOOR
                } else {
                    d
                }
            };
            neg_loglik -= density.ln();
        }
        (neg_loglik, floors)
    }
}
