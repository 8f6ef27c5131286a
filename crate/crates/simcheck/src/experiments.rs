//! Monte Carlo harness: reference data-generating designs and simulation
//! studies over bandwidth and departure grids.
//!
//! The designs are a single-index regression with an additive radial
//! departure (for the mean check, with a homoskedastic and a markedly
//! heteroskedastic noise variant) and a two-component conditional-law
//! mixture whose second component depends on the covariates only through
//! their norm (for the law check). In both, `delta = 0` is the null and
//! `delta` scales the departure.
//!
//! Every replication draws covariates row by row and then noise observation
//! by observation from a stream keyed by `(seed, replication)`, so studies
//! with different departure sizes see identical covariates and paired
//! noise — power curves are computed under common random numbers. Study
//! rows record rejection rates for both decision rules: asymptotic-normal
//! critical values and wild-bootstrap critical values.

use std::fmt;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bootstrap::{bootstrap_law, bootstrap_mean_grid, BootstrapOptions};
use crate::dataset::Dataset;
use crate::error::{Result, SimCheckError};
use crate::estimation::{
    fit_law_on_standardized, fit_mean_on_standardized, standardize_covariates, OptimizerConfig,
};
use crate::geometry::{normalize_direction, project, Direction, IndexFrame};
use crate::kernel::KernelSpec;
use crate::rng::{child_rng, child_seed, domain};
use crate::smoothers::{compute_ranks, law_gram, residual_field_law};
use crate::statistics::{
    asymptotic_p_value, normal_quantile, quadratic_form, statistic_law, statistic_mean,
};
use crate::sums::pairwise_sum;

/// Noise structure of the mean-check design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Standard normal errors.
    Homoskedastic,
    /// Centered log-normal errors scaled by `sqrt((1 + x2^2)/2)`: skewed
    /// and with variance tied to the second covariate.
    Heteroskedastic,
}

/// How the law-check design mixes its two components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureSampling {
    /// With probability `delta` the response is centered at `|x|`, else at
    /// the index: a genuine two-component conditional law.
    ComponentDraw,
    /// The response is centered at the blended mean
    /// `(1 - delta) index + delta |x|`: a single-component sensitivity
    /// variant that moves the conditional mean without the mixture shape.
    MeanBlend,
}

/// Mean-check design: `y = t + 4 exp(-t^2) + delta |x| + sigma eps` with
/// `t = x1 + x2` and standard normal covariates.
#[derive(Debug, Clone)]
pub struct MeanModelConfig {
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub sigma: f64,
    pub noise: NoiseKind,
}

impl MeanModelConfig {
    /// The reference design: `sigma = 0.3`, homoskedastic noise.
    pub fn new(n: usize, p: usize, delta: f64) -> Self {
        MeanModelConfig {
            n,
            p,
            delta,
            sigma: 0.3,
            noise: NoiseKind::Homoskedastic,
        }
    }
}

/// Law-check design in two covariates: the response is normal with
/// standard deviation `sd` around either the index `(x1 + x2)/sqrt 2` or,
/// with mixture weight `delta`, the covariate norm.
#[derive(Debug, Clone)]
pub struct LawModelConfig {
    pub n: usize,
    pub delta: f64,
    pub sd: f64,
    pub sampling: MixtureSampling,
}

impl LawModelConfig {
    /// The reference design: `sd = 0.3`, component-draw mixing.
    pub fn new(n: usize, delta: f64) -> Self {
        LawModelConfig {
            n,
            delta,
            sd: 0.3,
            sampling: MixtureSampling::ComponentDraw,
        }
    }
}

/// A simulation design together with the check it exercises.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Mean(MeanModelConfig),
    Law(LawModelConfig),
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Mean(m) => m.n,
            ModelSpec::Law(m) => m.n,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            ModelSpec::Mean(m) => m.p,
            ModelSpec::Law(_) => 2,
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            ModelSpec::Mean(m) => m.delta,
            ModelSpec::Law(m) => m.delta,
        }
    }

    pub fn with_delta(&self, delta: f64) -> ModelSpec {
        match self {
            ModelSpec::Mean(m) => ModelSpec::Mean(MeanModelConfig { delta, ..m.clone() }),
            ModelSpec::Law(m) => ModelSpec::Law(LawModelConfig { delta, ..m.clone() }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Mean(m) => match m.noise {
                NoiseKind::Homoskedastic => "mean-homo",
                NoiseKind::Heteroskedastic => "mean-hetero",
            },
            ModelSpec::Law(m) => match m.sampling {
                MixtureSampling::ComponentDraw => "law",
                MixtureSampling::MeanBlend => "law-blend",
            },
        }
    }

    /// The normalized data-generating index direction.
    pub fn true_direction(&self) -> Result<Direction> {
        let p = self.p();
        let mut beta = Array1::<f64>::zeros(p);
        beta[0] = 1.0;
        beta[1] = 1.0;
        normalize_direction(beta.view())
    }

    /// Generate replication `rep` of the design under `seed`.
    pub fn generate(&self, seed: u64, rep: u64) -> Result<Dataset> {
        match self {
            ModelSpec::Mean(m) => generate_mean(m, seed, rep),
            ModelSpec::Law(m) => generate_law(m, seed, rep),
        }
    }
}

/// Draw one replication of the mean-check design.
pub fn generate_mean(cfg: &MeanModelConfig, seed: u64, rep: u64) -> Result<Dataset> {
    if cfg.n < 10 {
        return Err(SimCheckError::SampleTooSmall { n: cfg.n, min: 10 });
    }
    if cfg.p < 2 {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("mean design needs p >= 2, got {}", cfg.p),
        });
    }
    if !(cfg.sigma.is_finite() && cfg.sigma > 0.0) {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("noise scale must be positive, got {}", cfg.sigma),
        });
    }
    if !(cfg.delta.is_finite() && cfg.delta >= 0.0) {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("departure size must be >= 0, got {}", cfg.delta),
        });
    }
    let (n, p) = (cfg.n, cfg.p);
    let mut rng = child_rng(seed, domain::DATA, rep);
    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            x[[i, j]] = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        }
    }
    let sqrt_e = std::f64::consts::E.sqrt();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let t = x[[i, 0]] + x[[i, 1]];
        let norm_sq: f64 = x.row(i).iter().map(|v| v * v).sum();
        let eps = match cfg.noise {
            NoiseKind::Homoskedastic => {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            }
            NoiseKind::Heteroskedastic => {
                let z: f64 =
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                let x2 = x[[i, 1]];
                (z.exp() - sqrt_e) * ((1.0 + x2 * x2) / 2.0).sqrt()
            }
        };
        y[i] = t + 4.0 * (-t * t).exp() + cfg.delta * norm_sq.sqrt() + cfg.sigma * eps;
    }
    Dataset::new(y, x)
}

/// Draw one replication of the law-check design.
pub fn generate_law(cfg: &LawModelConfig, seed: u64, rep: u64) -> Result<Dataset> {
    if cfg.n < 10 {
        return Err(SimCheckError::SampleTooSmall { n: cfg.n, min: 10 });
    }
    if !(cfg.sd.is_finite() && cfg.sd > 0.0) {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("response scale must be positive, got {}", cfg.sd),
        });
    }
    if !(cfg.delta.is_finite() && (0.0..=1.0).contains(&cfg.delta)) {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("mixture weight must lie in [0, 1], got {}", cfg.delta),
        });
    }
    let n = cfg.n;
    let mut rng = child_rng(seed, domain::DATA, rep);
    let mut x = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        for j in 0..2 {
            x[[i, j]] = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        }
    }
    let b = std::f64::consts::FRAC_1_SQRT_2;
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        // One uniform and one normal per observation in both variants, so
        // the two stay stream-aligned for paired comparisons.
        let u: f64 = rng.random();
        let z: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let index = b * (x[[i, 0]] + x[[i, 1]]);
        let norm = (x[[i, 0]] * x[[i, 0]] + x[[i, 1]] * x[[i, 1]]).sqrt();
        let center = match cfg.sampling {
            MixtureSampling::ComponentDraw => {
                if u < cfg.delta {
                    norm
                } else {
                    index
                }
            }
            MixtureSampling::MeanBlend => (1.0 - cfg.delta) * index + cfg.delta * norm,
        };
        y[i] = center + cfg.sd * z;
    }
    Dataset::new(y, x)
}

/// The bandwidth grid used throughout: `c` in `2^{k/2}` for `k = -2..=2`.
pub fn default_c_grid() -> Vec<f64> {
    (-2..=2).map(|k| 2f64.powf(k as f64 / 2.0)).collect()
}

/// Testing bandwidth `h = c n^{-2/9}`.
pub fn testing_bandwidth(c: f64, n: usize) -> f64 {
    c * (n as f64).powf(-2.0 / 9.0)
}

/// Index smoothing bandwidth `n^{-2/9}` used when the direction is known
/// rather than estimated.
pub fn known_index_bandwidth(n: usize) -> f64 {
    (n as f64).powf(-2.0 / 9.0)
}

/// Decision rule a study row was scored under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// `t_n` against the standard normal quantile.
    Asymptotic,
    /// `t_n` against the wild-bootstrap order statistic.
    Bootstrap,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Asymptotic => write!(f, "asymptotic"),
            Method::Bootstrap => write!(f, "bootstrap"),
        }
    }
}

/// One study cell scored under one decision rule.
#[derive(Debug, Clone)]
pub struct McRow {
    pub model: String,
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub c: f64,
    pub h: f64,
    pub method: Method,
    pub rejections: usize,
    /// Replications that completed the pipeline in this cell.
    pub replications: usize,
    /// Replications the pipeline failed on in this cell.
    pub failures: usize,
    /// `rejections / replications`.
    pub rate: f64,
    pub mean_t: f64,
    /// Mean p-value under this row's method.
    pub mean_p: f64,
    pub seed: u64,
}

/// Rejection-rate study output: two rows (one per [`Method`]) for every
/// (departure, bandwidth) cell.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub alpha: f64,
    /// Bootstrap replicates per test.
    pub b: usize,
    /// Replications requested per cell.
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<McRow>,
}

/// A simulation study configuration: replications of one design, each
/// pushed through the full estimate-test-calibrate pipeline.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: ModelSpec,
    pub reps: usize,
    pub c_grid: Vec<f64>,
    pub alpha: f64,
    /// Bootstrap replicates per test.
    pub b: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl StudyConfig {
    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(SimCheckError::InvalidConfig {
                reason: "study needs at least one replication".to_string(),
            });
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(SimCheckError::InvalidConfig {
                reason: "bandwidth grid must be non-empty and positive".to_string(),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SimCheckError::InvalidConfig {
                reason: format!("test level must lie in (0, 1), got {}", self.alpha),
            });
        }
        Ok(())
    }
}

struct CellOut {
    ts: Vec<f64>,
    boot_ps: Vec<f64>,
    boot_rejects: Vec<bool>,
}

/// Run the design's matching check over `reps` replications, scoring both
/// decision rules at every grid bandwidth. The index is re-estimated on
/// every replication. Replication failures are recorded per cell, not
/// fatal (unless a cell loses every replication).
pub fn run_rejection_study(cfg: &StudyConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let rows = study_rows(cfg)?;
    Ok(MonteCarloReport {
        alpha: cfg.alpha,
        b: cfg.b,
        reps: cfg.reps,
        seed: cfg.seed,
        rows,
    })
}

/// Size of the calibrated and asymptotic tests under the null:
/// [`run_rejection_study`] with the departure required to be zero.
pub fn run_level_study(cfg: &StudyConfig) -> Result<MonteCarloReport> {
    if cfg.model.delta() != 0.0 {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("level study requires delta = 0, got {}", cfg.model.delta()),
        });
    }
    run_rejection_study(cfg)
}

/// Power curve at a single bandwidth factor `c`: one pair of rows per
/// departure size, every departure run under the same seed so covariate
/// and noise streams pair up across the curve. The grid must contain the
/// null `delta = 0` as the curve's anchor.
pub fn run_power_study(
    cfg: &StudyConfig,
    c: f64,
    delta_grid: &[f64],
) -> Result<MonteCarloReport> {
    if !delta_grid.contains(&0.0) {
        return Err(SimCheckError::InvalidConfig {
            reason: "departure grid must include 0".to_string(),
        });
    }
    let mut rows = Vec::with_capacity(delta_grid.len() * 2);
    for &delta in delta_grid {
        let study = StudyConfig {
            model: cfg.model.with_delta(delta),
            c_grid: vec![c],
            ..cfg.clone()
        };
        study.validate()?;
        rows.extend(study_rows(&study)?);
    }
    Ok(MonteCarloReport {
        alpha: cfg.alpha,
        b: cfg.b,
        reps: cfg.reps,
        seed: cfg.seed,
        rows,
    })
}

fn study_rows(cfg: &StudyConfig) -> Result<Vec<McRow>> {
    let n = cfg.model.n();
    let hs: Vec<f64> = cfg.c_grid.iter().map(|&c| testing_bandwidth(c, n)).collect();

    let cells: Vec<Option<CellOut>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| run_one_cell(cfg, &hs, rep).ok())
        .collect();
    let failures = cells.iter().filter(|c| c.is_none()).count();
    let z_alpha = normal_quantile(1.0 - cfg.alpha)?;

    let mut rows = Vec::with_capacity(hs.len() * 2);
    for (k, (&c, &h)) in cfg.c_grid.iter().zip(&hs).enumerate() {
        let ts: Vec<f64> = cells.iter().flatten().map(|cell| cell.ts[k]).collect();
        let completed = ts.len();
        if completed == 0 {
            return Err(SimCheckError::EstimationFailed {
                reason: "every study replication failed".to_string(),
            });
        }
        let mean_t = pairwise_sum(&ts) / completed as f64;

        let asym_ps: Vec<f64> = ts.iter().map(|&t| asymptotic_p_value(t)).collect();
        let asym_rejections = ts.iter().filter(|&&t| t > z_alpha).count();
        let boot_ps: Vec<f64> = cells.iter().flatten().map(|cell| cell.boot_ps[k]).collect();
        let boot_rejections = cells
            .iter()
            .flatten()
            .filter(|cell| cell.boot_rejects[k])
            .count();

        for (method, rejections, ps) in [
            (Method::Asymptotic, asym_rejections, &asym_ps),
            (Method::Bootstrap, boot_rejections, &boot_ps),
        ] {
            rows.push(McRow {
                model: cfg.model.label().to_string(),
                n,
                p: cfg.model.p(),
                delta: cfg.model.delta(),
                c,
                h,
                method,
                rejections,
                replications: completed,
                failures,
                rate: rejections as f64 / completed as f64,
                mean_t,
                mean_p: pairwise_sum(ps) / completed as f64,
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

fn run_one_cell(cfg: &StudyConfig, hs: &[f64], rep: u64) -> Result<CellOut> {
    let data = cfg.model.generate(cfg.seed, rep)?;
    let fit_seed = child_seed(cfg.seed, domain::MC_CELL, rep * 2);
    let boot_seed = child_seed(cfg.seed, domain::MC_CELL, rep * 2 + 1);
    let optimizer = OptimizerConfig {
        seed: fit_seed,
        ..cfg.optimizer.clone()
    };
    let boot_opts = BootstrapOptions {
        b: cfg.b,
        alpha: cfg.alpha,
        seed: boot_seed,
        ..BootstrapOptions::default()
    };
    let smoothing = KernelSpec::smoothing();
    let testing = KernelSpec::testing();
    let (x_tilde, _) = standardize_covariates(data.x().view())?;

    match &cfg.model {
        ModelSpec::Mean(_) => {
            let fit = fit_mean_on_standardized(data.y().view(), x_tilde.view(), &optimizer)?;
            let frame = IndexFrame::new(fit.direction.clone());
            let ds_std = Dataset::new(data.y().clone(), x_tilde.clone())?;
            let mut observed = Vec::with_capacity(hs.len());
            for &h in hs {
                observed.push(
                    statistic_mean(&ds_std, &frame, fit.bandwidth_g, h, &smoothing, &testing)?
                        .t_n,
                );
            }
            let boots = bootstrap_mean_grid(
                data.y().view(),
                x_tilde.view(),
                &fit,
                &observed,
                hs,
                &optimizer,
                &boot_opts,
            )?;
            Ok(CellOut {
                ts: observed,
                boot_ps: boots.iter().map(|b| b.p_value).collect(),
                boot_rejects: boots.iter().map(|b| b.rejects()).collect(),
            })
        }
        ModelSpec::Law(_) => {
            let fit = fit_law_on_standardized(data.y().view(), x_tilde.view(), &optimizer)?;
            let frame = IndexFrame::new(fit.direction.clone());
            let (z, w) = project(x_tilde.view(), &frame)?;
            let ranks = compute_ranks(data.y().view())?;
            let field = residual_field_law(&ranks, z.view(), fit.bandwidth_g, &smoothing)?;
            let gram = law_gram(&field);
            let mut out = CellOut {
                ts: Vec::with_capacity(hs.len()),
                boot_ps: Vec::with_capacity(hs.len()),
                boot_rejects: Vec::with_capacity(hs.len()),
            };
            for &h in hs {
                let stat = quadratic_form(gram.view(), z.view(), w.view(), h, &testing)?;
                let boot =
                    bootstrap_law(gram.view(), z.view(), w.view(), h, stat.t_n, &boot_opts)?;
                out.ts.push(stat.t_n);
                out.boot_ps.push(boot.p_value);
                out.boot_rejects.push(boot.rejects());
            }
            Ok(out)
        }
    }
}

/// Statistics at the data-generating direction (no estimation, raw
/// covariates, index bandwidth `n^{-2/9}`), one per replication — the
/// ingredient for null-distribution diagnostics.
pub fn known_index_statistics(
    model: &ModelSpec,
    c: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(SimCheckError::InvalidConfig {
            reason: "need at least one replication".to_string(),
        });
    }
    let n = model.n();
    let g = known_index_bandwidth(n);
    let h = testing_bandwidth(c, n);
    let frame = IndexFrame::new(model.true_direction()?);
    let smoothing = KernelSpec::smoothing();
    let testing = KernelSpec::testing();

    (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = model.generate(seed, rep)?;
            let stat = match model {
                ModelSpec::Mean(_) => {
                    statistic_mean(&data, &frame, g, h, &smoothing, &testing)?
                }
                ModelSpec::Law(_) => statistic_law(&data, &frame, g, h, &smoothing, &testing)?,
            };
            Ok(stat.t_n)
        })
        .collect()
}

/// Stability probe output: per-replication absolute statistic changes under
/// a fixed-magnitude direction perturbation.
#[derive(Debug, Clone)]
pub struct PerturbationProbe {
    pub magnitude: f64,
    pub base_ts: Vec<f64>,
    pub abs_deltas: Vec<f64>,
    pub median_abs_delta: f64,
}

/// Recompute the known-direction statistic after nudging the direction by
/// `magnitude` along a replication-keyed random unit vector (then
/// renormalizing), and report `|t(perturbed) - t(base)|` per replication.
/// Magnitude zero skips the recomputation, so the deltas are exactly
/// zero — a null check on the probe itself. Perturbation vectors are keyed
/// only by `(seed, rep)`: probes at different magnitudes perturb along the
/// same directions, giving paired comparisons.
pub fn perturbation_stability_probe(
    model: &ModelSpec,
    c: f64,
    magnitude: f64,
    reps: usize,
    seed: u64,
) -> Result<PerturbationProbe> {
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(SimCheckError::InvalidConfig {
            reason: format!("perturbation magnitude must be >= 0, got {magnitude}"),
        });
    }
    if reps == 0 {
        return Err(SimCheckError::InvalidConfig {
            reason: "need at least one replication".to_string(),
        });
    }
    let n = model.n();
    let g = known_index_bandwidth(n);
    let h = testing_bandwidth(c, n);
    let base_dir = model.true_direction()?;
    let p = base_dir.dim();
    let base_frame = IndexFrame::new(base_dir.clone());
    let smoothing = KernelSpec::smoothing();
    let testing = KernelSpec::testing();

    let stat_at = |data: &Dataset, frame: &IndexFrame| -> Result<f64> {
        let out = match model {
            ModelSpec::Mean(_) => statistic_mean(data, frame, g, h, &smoothing, &testing)?,
            ModelSpec::Law(_) => statistic_law(data, frame, g, h, &smoothing, &testing)?,
        };
        Ok(out.t_n)
    };

    let pairs: Result<Vec<(f64, f64)>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = model.generate(seed, rep)?;
            let t0 = stat_at(&data, &base_frame)?;
            if magnitude == 0.0 {
                return Ok((t0, 0.0));
            }
            let mut rng = child_rng(seed, domain::PERTURBATION, rep);
            let mut u = Array1::<f64>::zeros(p);
            for v in u.iter_mut() {
                *v = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
            let norm = u.dot(&u).sqrt();
            if norm > 0.0 {
                u /= norm;
            } else {
                u[0] = 1.0;
            }
            let nudged = base_dir.beta().to_owned() + &(u * magnitude);
            let frame = IndexFrame::new(normalize_direction(nudged.view())?);
            let t1 = stat_at(&data, &frame)?;
            Ok((t0, (t1 - t0).abs()))
        })
        .collect();
    let pairs = pairs?;

    let base_ts: Vec<f64> = pairs.iter().map(|(t, _)| *t).collect();
    let abs_deltas: Vec<f64> = pairs.iter().map(|(_, d)| *d).collect();
    let mut sorted = abs_deltas.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median_abs_delta = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };

    Ok(PerturbationProbe {
        magnitude,
        base_ts,
        abs_deltas,
        median_abs_delta,
    })
}
