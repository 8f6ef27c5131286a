//! End-to-end runs on a single dataset: standardize, estimate the index,
//! compute the check statistic, calibrate it by wild bootstrap, and render
//! a plain-text report.
//!
//! Reports are fully determined by the dataset and configuration — floats
//! are printed in shortest round-trip form and nothing environmental
//! (timestamps, thread counts, paths) is included — so repeated runs are
//! byte-identical.

use std::fmt;

use ndarray::ArrayView1;

use crate::bootstrap::{bootstrap_law, bootstrap_mean, BootstrapOptions, BootstrapResult};
use crate::dataset::Dataset;
use crate::error::{Result, SimCheckError};
use crate::estimation::{
    fit_law_on_standardized, fit_mean_on_standardized, standardize_covariates, FitResult,
    OptimizerConfig,
};
use crate::geometry::{normalize_direction, project, Direction, IndexFrame};
use crate::kernel::KernelSpec;
use crate::experiments::testing_bandwidth;
use crate::smoothers::{compute_ranks, law_gram, residual_field_law};
use crate::statistics::{asymptotic_p_value, quadratic_form, statistic_mean, StatisticOutput};

/// Which model property is under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    /// Conditional mean is a function of the index alone.
    Mean,
    /// The whole conditional law depends on the covariates only through
    /// the index.
    Law,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestKind::Mean => write!(f, "mean"),
            TestKind::Law => write!(f, "law"),
        }
    }
}

/// Settings for a single-dataset run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: TestKind,
    /// Testing bandwidth factor: `h = c n^{-2/9}`.
    pub c: f64,
    /// Explicit testing bandwidth, overriding `c`.
    pub h_override: Option<f64>,
    pub alpha: f64,
    /// Bootstrap replicates.
    pub b: usize,
    pub seed: u64,
    /// Starting value for the law check's rank bandwidth search.
    pub gy_start: f64,
    /// Starting points for the index search.
    pub starts: usize,
    /// Objective evaluation budget per start.
    pub max_evals: usize,
}

impl RunConfig {
    /// Mean-check defaults: `c = 1`, level 0.10, 499 bootstrap replicates.
    pub fn mean() -> Self {
        RunConfig {
            kind: TestKind::Mean,
            c: 1.0,
            h_override: None,
            alpha: 0.10,
            b: 499,
            seed: 0,
            gy_start: 0.1,
            starts: 5,
            max_evals: 2000,
        }
    }

    /// Law-check defaults: as [`RunConfig::mean`] but 199 replicates (each
    /// observed statistic is recalibrated without re-estimation, and the
    /// heavier Gram pipeline dominates).
    pub fn law() -> Self {
        RunConfig {
            kind: TestKind::Law,
            b: 199,
            ..RunConfig::mean()
        }
    }
}

/// Everything a run produces; `report` is the rendered text.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub kind: TestKind,
    pub n: usize,
    pub p: usize,
    /// Testing bandwidth actually used.
    pub h: f64,
    /// The factor `h` was derived from, `None` when overridden.
    pub c: Option<f64>,
    pub fit: FitResult,
    /// Fitted direction mapped back to the original covariate units.
    pub raw_direction: Direction,
    pub statistic: StatisticOutput,
    pub bootstrap: BootstrapResult,
    pub asymptotic_p: f64,
    pub warnings: Vec<String>,
    pub report: String,
}

impl RunOutput {
    /// Bootstrap-calibrated decision at the configured level.
    pub fn rejects(&self) -> bool {
        self.bootstrap.rejects()
    }
}

/// Map a direction fitted on standardized covariates back to original
/// units: divide each coefficient by its column scale and renormalize.
pub fn raw_scale_direction(direction: &Direction, scales: ArrayView1<f64>) -> Result<Direction> {
    if scales.len() != direction.dim() {
        return Err(SimCheckError::DimensionMismatch {
            context: "direction scales",
            expected: direction.dim(),
            got: scales.len(),
        });
    }
    let raw = ndarray::Array1::from_iter(
        direction
            .beta()
            .iter()
            .zip(scales.iter())
            .map(|(b, s)| b / s),
    );
    normalize_direction(raw.view())
}

/// Run one check end to end. Requires at least ten observations — below
/// that no smoothing-based inference is meaningful.
pub fn run(dataset: &Dataset, cfg: &RunConfig) -> Result<RunOutput> {
    let n = dataset.n();
    let p = dataset.p();
    if n < 10 {
        return Err(SimCheckError::SampleTooSmall { n, min: 10 });
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("test level must lie in (0, 1), got {}", cfg.alpha),
        });
    }
    let h = match cfg.h_override {
        Some(h) => {
            if !(h.is_finite() && h > 0.0) {
                return Err(SimCheckError::InvalidBandwidth { value: h });
            }
            h
        }
        None => {
            if !(cfg.c.is_finite() && cfg.c > 0.0) {
                return Err(SimCheckError::InvalidConfig {
                    reason: format!("bandwidth factor must be positive, got {}", cfg.c),
                });
            }
            testing_bandwidth(cfg.c, n)
        }
    };

    let (x_tilde, scales) = standardize_covariates(dataset.x().view())?;
    let optimizer = OptimizerConfig {
        seed: cfg.seed,
        gy_start: cfg.gy_start,
        starts: cfg.starts,
        max_evals: cfg.max_evals,
        ..OptimizerConfig::default()
    };
    optimizer.validate()?;
    let boot_opts = BootstrapOptions {
        b: cfg.b,
        alpha: cfg.alpha,
        seed: cfg.seed,
        ..BootstrapOptions::default()
    };
    let smoothing = KernelSpec::smoothing();
    let testing = KernelSpec::testing();

    let (fit, statistic, bootstrap) = match cfg.kind {
        TestKind::Mean => {
            let fit = fit_mean_on_standardized(dataset.y().view(), x_tilde.view(), &optimizer)?;
            let frame = IndexFrame::new(fit.direction.clone());
            let ds_std = Dataset::new(dataset.y().clone(), x_tilde.clone())?;
            let statistic =
                statistic_mean(&ds_std, &frame, fit.bandwidth_g, h, &smoothing, &testing)?;
            let bootstrap = bootstrap_mean(
                dataset.y().view(),
                x_tilde.view(),
                &fit,
                statistic.t_n,
                h,
                &optimizer,
                &boot_opts,
            )?;
            (fit, statistic, bootstrap)
        }
        TestKind::Law => {
            let fit = fit_law_on_standardized(dataset.y().view(), x_tilde.view(), &optimizer)?;
            let frame = IndexFrame::new(fit.direction.clone());
            let (z, w) = project(x_tilde.view(), &frame)?;
            let ranks = compute_ranks(dataset.y().view())?;
            let field = residual_field_law(&ranks, z.view(), fit.bandwidth_g, &smoothing)?;
            let gram = law_gram(&field);
            let statistic = quadratic_form(gram.view(), z.view(), w.view(), h, &testing)?;
            let bootstrap =
                bootstrap_law(gram.view(), z.view(), w.view(), h, statistic.t_n, &boot_opts)?;
            (fit, statistic, bootstrap)
        }
    };

    let raw_direction = raw_scale_direction(&fit.direction, scales.view())?;
    let asymptotic_p = asymptotic_p_value(statistic.t_n);
    let warnings = collect_warnings(&fit, &bootstrap, n);
    let report = render_report(
        cfg,
        n,
        p,
        h,
        &fit,
        &raw_direction,
        &statistic,
        &bootstrap,
        asymptotic_p,
        &warnings,
    );

    Ok(RunOutput {
        kind: cfg.kind,
        n,
        p,
        h,
        c: if cfg.h_override.is_some() {
            None
        } else {
            Some(cfg.c)
        },
        fit,
        raw_direction,
        statistic,
        bootstrap,
        asymptotic_p,
        warnings,
        report,
    })
}

fn collect_warnings(fit: &FitResult, boot: &BootstrapResult, n: usize) -> Vec<String> {
    let mut warnings = Vec::new();
    if fit.bandwidth_warning {
        let nf = n as f64;
        warnings.push(format!(
            "fitted smoothing bandwidth {} is outside the supported range [{}, {}] for n = {n}",
            fit.bandwidth_g,
            0.1 * nf.powf(-0.25),
            10.0 * nf.powf(-0.2),
        ));
    }
    if !fit.converged {
        warnings.push("index search stopped on its evaluation budget, not on convergence".to_string());
    }
    if fit.nw_fallbacks > 0 {
        warnings.push(format!(
            "{} leave-one-out denominators fell back to the sample mean",
            fit.nw_fallbacks
        ));
    }
    if fit.density_floors > 0 {
        warnings.push(format!(
            "{} pseudo-likelihood density estimates were floored",
            fit.density_floors
        ));
    }
    if boot.failed_replicates > 0 {
        warnings.push(format!(
            "{} of {} bootstrap replicates failed{}",
            boot.failed_replicates,
            boot.b_requested,
            if boot.degraded {
                "; calibration is degraded"
            } else {
                ""
            }
        ));
    }
    warnings
}

fn format_coefficients(beta: ArrayView1<f64>) -> String {
    beta.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[allow(clippy::too_many_arguments)]
fn render_report(
    cfg: &RunConfig,
    n: usize,
    p: usize,
    h: f64,
    fit: &FitResult,
    raw_direction: &Direction,
    statistic: &StatisticOutput,
    bootstrap: &BootstrapResult,
    asymptotic_p: f64,
    warnings: &[String],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} check\n", cfg.kind));
    out.push_str(&format!("n = {n}, p = {p}\n"));
    out.push_str(&format!(
        "direction (standardized): {}\n",
        format_coefficients(fit.direction.beta())
    ));
    out.push_str(&format!(
        "direction (original units): {}\n",
        format_coefficients(raw_direction.beta())
    ));
    out.push_str(&format!(
        "index smoothing bandwidth g = {} (coefficient norm {})\n",
        fit.bandwidth_g, fit.raw_norm
    ));
    out.push_str(&format!(
        "index search: {} objective evaluations, {}\n",
        fit.optimizer_evals,
        if fit.converged {
            "converged"
        } else {
            "stopped on budget"
        }
    ));
    if let Some(gy) = fit.gy {
        out.push_str(&format!("rank bandwidth g_y = {gy}\n"));
    }
    match cfg.h_override {
        Some(_) => out.push_str(&format!("testing bandwidth h = {h} (override)\n")),
        None => out.push_str(&format!("testing bandwidth h = {h} (c = {})\n", cfg.c)),
    }
    out.push_str(&format!(
        "statistic: i_n = {}, v_n = {}, t_n = {}\n",
        statistic.i_n, statistic.v_n, statistic.t_n
    ));
    out.push_str(&format!("asymptotic p-value = {asymptotic_p}\n"));
    out.push_str(&format!(
        "bootstrap (B = {}, effective {}, seed = {}): critical value = {}, p-value = {}\n",
        bootstrap.b_requested,
        bootstrap.b_effective,
        bootstrap.seed,
        bootstrap.critical_value,
        bootstrap.p_value
    ));
    out.push_str(&format!(
        "decision at level {}: {}\n",
        bootstrap.alpha,
        if bootstrap.rejects() {
            "reject"
        } else {
            "fail to reject"
        }
    ));
    for w in warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}
