//! `simcheck` — specification checks for single-index models.
//!
//! `test-mean` and `test-law` run one check on a CSV dataset and print a
//! plain-text report; `mc-level` and `mc-power` run seeded Monte Carlo
//! studies on the built-in designs and print a study CSV (one row per
//! departure/bandwidth/method cell), optionally writing a plot-ready
//! companion CSV. Exit codes: 0 success, 1 input or estimation error,
//! 2 degenerate statistic. Everything is keyed by `--seed`; repeated runs
//! are byte-identical regardless of `--threads`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use simcheck::error::SimCheckError;
use simcheck::estimation::OptimizerConfig;
use simcheck::experiments::{
    default_c_grid, run_level_study, run_power_study, LawModelConfig, McRow, MeanModelConfig,
    MixtureSampling, ModelSpec, MonteCarloReport, NoiseKind, StudyConfig,
};
use simcheck::io::{load_dataset, plot_csv, report_to_csv, PlotAxis};
use simcheck::runner::{run, RunConfig, TestKind};
use simcheck::Result;

#[derive(Parser)]
#[command(
    name = "simcheck",
    version,
    about = "Specification checks for single-index models",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for the parallel sections (default: all cores).
    /// Results never depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Test that the conditional mean depends on x only through one index.
    TestMean(TestArgs),
    /// Test that the whole conditional law depends on x only through one
    /// index (rank-based; invariant to monotone response transforms).
    TestLaw(TestLawArgs),
    /// Monte Carlo null rejection rates over a bandwidth-factor grid.
    McLevel(McLevelArgs),
    /// Monte Carlo power curve over a departure grid.
    McPower(McPowerArgs),
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV with header `y,x1,...,xp`.
    #[arg(long)]
    data: PathBuf,

    /// Testing bandwidth factor: h = c * n^(-2/9).
    #[arg(long, default_value_t = 1.0)]
    c: f64,

    /// Raw testing bandwidth override (research use); takes precedence
    /// over --c and is echoed in the report.
    #[arg(long)]
    h: Option<f64>,

    /// Bootstrap replicates (default: 499 for test-mean, 199 for test-law).
    #[arg(long = "B")]
    b: Option<usize>,

    /// Test level.
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,

    /// Master seed for fitting and bootstrap streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Starting points for the index search.
    #[arg(long, default_value_t = 5)]
    starts: usize,

    /// Objective evaluation budget per start.
    #[arg(long, default_value_t = 2000)]
    max_evals: usize,

    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestLawArgs {
    #[command(flatten)]
    base: TestArgs,

    /// Starting value for the rank-bandwidth search.
    #[arg(long, default_value_t = 0.1)]
    gy_start: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    /// Index regression with additive radial departure, normal errors.
    MeanHomo,
    /// Same design with skewed, covariate-dependent error scale.
    MeanHetero,
    /// Two-component conditional-law mixture in two covariates.
    Law,
}

#[derive(Args)]
struct McArgs {
    /// Simulation design.
    #[arg(long, value_enum)]
    model: ModelArg,

    /// Law design only: blend the component means instead of drawing a
    /// component (a mean-shift sensitivity variant).
    #[arg(long)]
    blend: bool,

    /// Observations per replication.
    #[arg(long)]
    n: usize,

    /// Covariate dimension (mean designs only; the law design is
    /// bivariate). Default 2.
    #[arg(long)]
    p: Option<usize>,

    /// Replications per cell (defaults depend on the command and model;
    /// smaller counts are flagged as reduced-scale runs).
    #[arg(long)]
    reps: Option<usize>,

    /// Bootstrap replicates per test (default: 499 for mean designs, 199
    /// for the law design).
    #[arg(long = "B")]
    b: Option<usize>,

    /// Test level.
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,

    /// Master seed; every report row carries it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Starting points for each index search.
    #[arg(long, default_value_t = 5)]
    starts: usize,

    /// Objective evaluation budget per start.
    #[arg(long, default_value_t = 2000)]
    max_evals: usize,

    /// Also write the study CSV to this file.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write the plot-data CSV (x, method, rate) to this file. Default:
    /// alongside --out with a `.plot.csv` suffix; omitted entirely when
    /// neither flag is given.
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Args)]
struct McLevelArgs {
    #[command(flatten)]
    base: McArgs,

    /// Comma-separated bandwidth factors (default: 2^(k/2) for k = -2..=2).
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct McPowerArgs {
    #[command(flatten)]
    base: McArgs,

    /// Comma-separated departure sizes; must include 0, the curve's anchor.
    #[arg(long, value_delimiter = ',', required = true)]
    delta_grid: Vec<f64>,

    /// Comma-separated bandwidth factors (default: 1).
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure the thread pool: {err}");
            return ExitCode::from(1);
        }
    }

    let outcome = match &cli.command {
        Cmd::TestMean(args) => run_test(TestKind::Mean, args, None),
        Cmd::TestLaw(args) => run_test(TestKind::Law, &args.base, Some(args.gy_start)),
        Cmd::McLevel(args) => run_mc_level(args),
        Cmd::McPower(args) => run_mc_power(args),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run_test(kind: TestKind, args: &TestArgs, gy_start: Option<f64>) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let defaults = match kind {
        TestKind::Mean => RunConfig::mean(),
        TestKind::Law => RunConfig::law(),
    };
    let cfg = RunConfig {
        kind,
        c: args.c,
        h_override: args.h,
        alpha: args.alpha,
        b: args.b.unwrap_or(defaults.b),
        seed: args.seed,
        gy_start: gy_start.unwrap_or(defaults.gy_start),
        starts: args.starts,
        max_evals: args.max_evals,
    };
    let output = run(&dataset, &cfg)?;
    print!("{}", output.report);
    if let Some(path) = &args.out {
        std::fs::write(path, &output.report)?;
    }
    Ok(())
}

fn build_model(args: &McArgs, delta: f64) -> Result<ModelSpec> {
    match args.model {
        ModelArg::MeanHomo | ModelArg::MeanHetero => {
            if args.blend {
                return Err(SimCheckError::InvalidConfig {
                    reason: "--blend applies only to the law design".to_string(),
                });
            }
            let noise = match args.model {
                ModelArg::MeanHomo => NoiseKind::Homoskedastic,
                _ => NoiseKind::Heteroskedastic,
            };
            Ok(ModelSpec::Mean(MeanModelConfig {
                noise,
                ..MeanModelConfig::new(args.n, args.p.unwrap_or(2), delta)
            }))
        }
        ModelArg::Law => {
            if let Some(p) = args.p {
                if p != 2 {
                    return Err(SimCheckError::InvalidConfig {
                        reason: format!("the law design is bivariate; got --p {p}"),
                    });
                }
            }
            let sampling = if args.blend {
                MixtureSampling::MeanBlend
            } else {
                MixtureSampling::ComponentDraw
            };
            Ok(ModelSpec::Law(LawModelConfig {
                sampling,
                ..LawModelConfig::new(args.n, delta)
            }))
        }
    }
}

fn study_config(args: &McArgs, model: ModelSpec, c_grid: Vec<f64>, reps: usize) -> StudyConfig {
    let default_b = match model {
        ModelSpec::Mean(_) => 499,
        ModelSpec::Law(_) => 199,
    };
    StudyConfig {
        model,
        reps,
        c_grid,
        alpha: args.alpha,
        b: args.b.unwrap_or(default_b),
        seed: args.seed,
        optimizer: OptimizerConfig {
            starts: args.starts,
            max_evals: args.max_evals,
            seed: args.seed,
            ..OptimizerConfig::default()
        },
    }
}

fn resolve_reps(args: &McArgs, default: usize) -> usize {
    let reps = args.reps.unwrap_or(default);
    if reps < default {
        eprintln!(
            "note: {reps} replications per cell is below the study default of {default}; \
             treat the rates as a reduced-scale run"
        );
    }
    reps
}

fn emit_study(args: &McArgs, report: &MonteCarloReport, axis: PlotAxis) -> Result<()> {
    let csv = report_to_csv(report);
    print!("{csv}");
    if let Some(path) = &args.out {
        std::fs::write(path, &csv)?;
    }
    let plot_path = args.plot_out.clone().or_else(|| {
        args.out.as_ref().map(|out| {
            let mut name = out.file_stem().unwrap_or_default().to_os_string();
            name.push(".plot.csv");
            out.with_file_name(name)
        })
    });
    if let Some(path) = plot_path {
        std::fs::write(path, plot_csv(report, axis))?;
    }
    Ok(())
}

fn run_mc_level(args: &McLevelArgs) -> Result<()> {
    let model = build_model(&args.base, 0.0)?;
    let default_reps = match model {
        ModelSpec::Mean(_) => 500,
        ModelSpec::Law(_) => 1000,
    };
    let reps = resolve_reps(&args.base, default_reps);
    let c_grid = args.c_grid.clone().unwrap_or_else(default_c_grid);
    let cfg = study_config(&args.base, model, c_grid, reps);
    let report = run_level_study(&cfg)?;
    emit_study(&args.base, &report, PlotAxis::BandwidthFactor)
}

fn run_mc_power(args: &McPowerArgs) -> Result<()> {
    let model = build_model(&args.base, 0.0)?;
    let default_reps = match model {
        ModelSpec::Mean(_) => 250,
        ModelSpec::Law(_) => 500,
    };
    let reps = resolve_reps(&args.base, default_reps);
    let c_grid = args.c_grid.clone().unwrap_or_else(|| vec![1.0]);
    let cfg = study_config(&args.base, model, c_grid.clone(), reps);

    let mut rows: Vec<McRow> = Vec::new();
    let mut merged: Option<MonteCarloReport> = None;
    for &c in &c_grid {
        let report = run_power_study(&cfg, c, &args.delta_grid)?;
        rows.extend(report.rows.iter().cloned());
        merged = Some(report);
    }
    let mut report = merged.expect("non-empty bandwidth grid");
    report.rows = rows;
    emit_study(&args.base, &report, PlotAxis::Departure)
}
