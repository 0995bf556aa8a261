//! The `soc-planner` command line. [`run`] parses arguments, dispatches to
//! the shared service handlers and maps errors to exit codes:
//! 0 success, 2 invalid input or unreadable file, 3 infeasible problem,
//! 1 anything else.

mod inputs;
mod render;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use soc_core::estimation::Aggregation;
use soc_core::io::{
    emit_curve_csv, emit_json, emit_key_value_csv, emit_series_csv, parse_composites_csv, parse_replicates_csv,
};
use soc_core::service::{self, respond};
use soc_core::simulator::{CompositeStrategy, ErrorDistribution, RunOptions, SimulationSettings, SpatialCorrelation};
use soc_core::{Error, Result, StockGeometry};

use inputs::{read_file, MethodArgs, StudyArgs};

/// Environment variable capping simulator threads.
pub const THREADS_ENV: &str = "SOC_PLANNER_THREADS";

#[derive(Parser)]
#[command(name = "soc-planner", version, about = "Plan and analyze composited soil organic carbon surveys")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best design for a budget.
    Optimize(OptimizeArgs),
    /// Cheapest design meeting a precision target.
    MinCost(MinCostArgs),
    /// Optimal number of cores per composite.
    CompositeSize(CompositeSizeArgs),
    /// Ratio of optimal SEs of two methods.
    Efficiency(EfficiencyArgs),
    /// SE against budget, or SE and cost against assay count.
    Curves(CurvesArgs),
    /// Mean, SE and confidence interval from assay files.
    Estimate(EstimateArgs),
    /// Difference between two plots with a permutation test.
    Diff(DiffArgs),
    /// Monte Carlo check of the variance formula and estimators.
    Simulate(SimulateArgs),
    /// SOC stock of a plot from its mean concentration.
    Stock(StockArgs),
    /// Walking distance for sampling a plot.
    PathLength(PathLengthArgs),
    /// Composite sizes, relative efficiencies and curve data for every
    /// profile and core cost.
    Tables(TablesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    output: Format,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    budget: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct MinCostArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, conflicts_with = "target_variance")]
    target_se: Option<f64>,
    #[arg(long)]
    target_variance: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CompositeSizeArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct EfficiencyArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    method: MethodArgs,
    /// Method compared against `--method`.
    #[arg(long)]
    versus: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, value_delimiter = ',', conflicts_with = "fixed_n")]
    budgets: Option<Vec<f64>>,
    #[arg(long)]
    fixed_n: Option<u64>,
    #[arg(long, value_delimiter = ',', requires = "fixed_n")]
    k_grid: Option<Vec<u64>>,
    /// Show coefficients of variation instead of SEs in text output.
    #[arg(long)]
    cv: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Median,
    Mean,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    composites: PathBuf,
    /// Plot to use when the file holds several.
    #[arg(long)]
    plot_id: Option<String>,
    #[arg(long, conflicts_with = "sigma_delta")]
    replicates: Option<PathBuf>,
    #[arg(long)]
    sigma_delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = AggregationArg::Median)]
    aggregation: AggregationArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Degrees of freedom; k - 1 (composites minus one) by default.
    #[arg(long)]
    df: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct DiffArgs {
    composites1: PathBuf,
    composites2: PathBuf,
    #[arg(long)]
    plot1: Option<String>,
    #[arg(long)]
    plot2: Option<String>,
    /// Assay error SD for both plots.
    #[arg(long)]
    sigma_delta: Option<f64>,
    #[arg(long)]
    sigma_delta_1: Option<f64>,
    #[arg(long)]
    sigma_delta_2: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Monte Carlo permutations when exact enumeration is too large; 0
    /// skips the test.
    #[arg(long, default_value_t = 10_000)]
    permutations: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorModelArg {
    Gamma,
    Lognormal,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Random,
    Adjacent,
    Interleaved,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrelationArg {
    None,
    SmoothGradient,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    error_model: Option<ErrorModelArg>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    correlation: Option<CorrelationArg>,
    #[arg(long)]
    grid_rows: Option<usize>,
    #[arg(long)]
    grid_cols: Option<usize>,
    #[arg(long)]
    texture_seed: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct StockArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampling depth, m.
    #[arg(long)]
    depth: Option<f64>,
    /// Plot area, m².
    #[arg(long)]
    area: Option<f64>,
    /// Bulk density, g/cm³.
    #[arg(long)]
    density: Option<f64>,
    /// Mean concentration, %SOC.
    #[arg(long)]
    mu: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct PathLengthArgs {
    #[arg(long)]
    n: u64,
    /// Plot area, m².
    #[arg(long)]
    area: f64,
    #[arg(long, default_value_t = soc_core::design::BHH_ROUNDED)]
    beta: f64,
    #[arg(long, requires = "height")]
    width: Option<f64>,
    #[arg(long, requires = "width")]
    height: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct TablesArgs {
    /// One config per soil profile; the built-in reference profiles if absent.
    #[arg(long)]
    config: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    core_costs: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<f64>>,
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    tradeoff_method: Option<String>,
    #[arg(long)]
    tradeoff_n: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation { .. } | Error::Parse { .. } => 2,
        Error::Infeasible { .. } => 3,
        Error::TimeBudget { .. } => 1,
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> std::io::Result<()> {
    out.write_all(text.as_bytes())?;
    out.flush()
}

/// Renders a response body in the requested format.
fn emit<T: Serialize>(format: Format, body: T, text: impl FnOnce(&T) -> String) -> Result<String> {
    match format {
        Format::Json => emit_json(&respond(body)),
        Format::Csv => emit_key_value_csv(&respond(body)),
        Format::Text => Ok(text(&body)),
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t >= 1)
            .map(Some)
            .ok_or_else(|| Error::validation(THREADS_ENV, format!("expected a positive integer, got {v:?}"))),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let shown = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write_out(out, &shown);
                    0
                }
                _ => {
                    let _ = write_out(err, &shown);
                    2
                }
            };
        }
    };
    let mut warnings = Vec::new();
    match dispatch(cli.command, &mut warnings) {
        Ok(text) => {
            for w in &warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            match write_out(out, &text) {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(err, "error: cannot write output: {e}");
                    1
                }
            }
        }
        Err(e) => {
            for w in &warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, warnings: &mut Vec<String>) -> Result<String> {
    match command {
        Command::Optimize(a) => {
            let study = a.study.resolve()?;
            let method = a.method.select(&study.methods)?;
            let budget = a
                .budget
                .or(study.config.as_ref().and_then(|c| c.budget).map(|b| b.total))
                .ok_or_else(|| Error::validation("budget", "missing --budget"))?;
            let req = service::OptimizeRequest {
                plot: study.plot,
                costs: study.costs,
                method,
                budget,
            };
            emit(a.out.output, service::optimize(&req)?, |r| render::allocation(r, &req.method.name))
        }
        Command::MinCost(a) => {
            let study = a.study.resolve()?;
            let method = a.method.select(&study.methods)?;
            let (max_variance, max_se) = match (a.target_variance, a.target_se) {
                (None, None) => match study.config.as_ref().and_then(|c| c.precision) {
                    Some(p) => (Some(p.max_variance), None),
                    None => return Err(Error::validation("target_se", "missing --target-se or --target-variance")),
                },
                other => other,
            };
            let req = service::MinCostRequest {
                plot: study.plot,
                costs: study.costs,
                method,
                max_variance,
                max_se,
            };
            emit(a.out.output, service::min_cost(&req)?, |r| render::allocation(r, &req.method.name))
        }
        Command::CompositeSize(a) => {
            let study = a.study.resolve()?;
            let req = service::CompositeSizeRequest {
                method: a.method.select(&study.methods)?,
                plot: study.plot,
                costs: study.costs,
            };
            emit(a.out.output, service::composite_size(&req)?, render::composite_size)
        }
        Command::Efficiency(a) => {
            let study = a.study.resolve()?;
            let method1 = a.method.select(&study.methods)?;
            let method2 = inputs::find_method(&study.methods, &a.versus, "versus")?;
            let req = service::EfficiencyRequest {
                plot: study.plot,
                costs: study.costs,
                method1,
                method2,
            };
            emit(a.out.output, service::efficiency(&req)?, render::efficiency)
        }
        Command::Curves(a) => {
            let study = a.study.resolve()?;
            let methods = if a.method.is_empty() {
                study.methods.clone()
            } else {
                vec![a.method.select(&study.methods)?]
            };
            let budgets = match (&a.budgets, a.fixed_n) {
                (None, None) => match study.config.as_ref().and_then(|c| c.budget) {
                    Some(b) => Some(vec![b.total]),
                    None => return Err(Error::validation("budgets", "missing --budgets or --fixed-n")),
                },
                (b, _) => b.clone(),
            };
            let req = service::CurvesRequest {
                plot: study.plot,
                costs: study.costs,
                methods,
                budgets,
                fixed_n: a.fixed_n,
                k_grid: a.k_grid.clone(),
            };
            let r = service::curves(&req)?;
            match a.out.output {
                Format::Csv if r.series.len() == 1 => Ok(emit_curve_csv(&r.series[0].points)),
                Format::Csv => Ok(emit_series_csv(&r.series)),
                f => emit(f, r, |r| render::curves(r, a.cv)),
            }
        }
        Command::Estimate(a) => {
            let data = parse_composites_csv(&read_file(&a.composites)?, &a.composites.display().to_string())?;
            warnings.extend(data.source.warnings.iter().cloned());
            let assays = data.plot(a.plot_id.as_deref())?;
            let replicates = match &a.replicates {
                Some(path) => {
                    let reps = parse_replicates_csv(&read_file(path)?, &path.display().to_string())?;
                    warnings.extend(reps.source.warnings.iter().cloned());
                    Some(reps.assays.groups)
                }
                None => None,
            };
            if replicates.is_none() && a.sigma_delta.is_none() {
                return Err(Error::validation("sigma_delta", "give --sigma-delta or --replicates"));
            }
            let req = service::EstimateRequest {
                composites: assays.values.clone(),
                n: assays.n,
                sigma_delta: a.sigma_delta,
                replicates,
                aggregation: match a.aggregation {
                    AggregationArg::Median => Aggregation::Median,
                    AggregationArg::Mean => Aggregation::Mean,
                },
                alpha: a.alpha,
                df: a.df,
            };
            let r = service::estimate(&req)?;
            warnings.extend(r.warnings.iter().cloned());
            emit(a.out.output, r, render::estimate)
        }
        Command::Diff(a) => {
            let load = |path: &PathBuf, plot: &Option<String>| -> Result<soc_core::estimation::CompositeAssays> {
                let data = parse_composites_csv(&read_file(path)?, &path.display().to_string())?;
                data.plot(plot.as_deref()).cloned()
            };
            let sd = |own: Option<f64>, which: &str| {
                own.or(a.sigma_delta)
                    .ok_or_else(|| Error::validation(format!("sigma_delta_{which}"), "missing --sigma-delta"))
            };
            let req = service::DiffRequest {
                data1: load(&a.composites1, &a.plot1)?,
                data2: load(&a.composites2, &a.plot2)?,
                sigma_delta_1: sd(a.sigma_delta_1, "1")?,
                sigma_delta_2: sd(a.sigma_delta_2, "2")?,
                alpha: a.alpha,
                permutations: a.permutations,
                seed: a.seed,
            };
            emit(a.out.output, service::diff(&req)?, render::diff)
        }
        Command::Simulate(a) => {
            let study = a.study.resolve_plot_only()?;
            let method = a.method.select(&study.methods)?;
            let base = study.config.as_ref().and_then(|c| c.simulation.clone());
            let (n, k) = match (a.n.or(base.as_ref().map(|s| s.n)), a.k.or(base.as_ref().map(|s| s.k))) {
                (Some(n), Some(k)) => (n, k),
                (None, _) => return Err(Error::validation("n", "missing --n")),
                (_, None) => return Err(Error::validation("k", "missing --k")),
            };
            let mut s = base.unwrap_or_else(|| SimulationSettings::new(n, k, 1000, 0));
            s.n = n;
            s.k = k;
            if let Some(r) = a.reps {
                s.replications = r;
            }
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            if let Some(m) = a.error_model {
                s.error_model = match m {
                    ErrorModelArg::Gamma => ErrorDistribution::Gamma,
                    ErrorModelArg::Lognormal => ErrorDistribution::Lognormal,
                };
            }
            if let Some(st) = a.strategy {
                s.strategy = match st {
                    StrategyArg::Random => CompositeStrategy::Random,
                    StrategyArg::Adjacent => CompositeStrategy::Adjacent,
                    StrategyArg::Interleaved => CompositeStrategy::Interleaved,
                };
            }
            if let Some(c) = a.correlation {
                s.correlation = match c {
                    CorrelationArg::None => SpatialCorrelation::None,
                    CorrelationArg::SmoothGradient => SpatialCorrelation::SmoothGradient,
                };
            }
            if let Some(r) = a.grid_rows {
                s.grid_rows = r;
            }
            if let Some(c) = a.grid_cols {
                s.grid_cols = c;
            }
            if let Some(t) = a.texture_seed {
                s.texture_seed = t;
            }
            let req = service::SimulateRequest {
                plot: study.plot,
                method,
                settings: s,
            };
            let opts = RunOptions {
                threads: threads_from_env()?,
                time_budget: None,
            };
            emit(a.out.output, service::simulate(&req, None, &opts)?, render::simulation)
        }
        Command::Stock(a) => {
            let config = a.config.as_ref().map(|p| inputs::load_config(p)).transpose()?;
            let geom = config.as_ref().and_then(|c| c.geometry);
            let pick = |flag: Option<f64>, base: Option<f64>, name: &str| {
                flag.or(base)
                    .ok_or_else(|| Error::validation(name, format!("missing --{}", name.replace('_', "-"))))
            };
            let req = service::StockRequest {
                geometry: StockGeometry {
                    depth_m: pick(a.depth, geom.map(|g| g.depth_m), "depth")?,
                    area_m2: pick(a.area, geom.map(|g| g.area_m2), "area")?,
                    bulk_density: pick(a.density, geom.map(|g| g.bulk_density), "density")?,
                },
                mu: pick(a.mu, config.as_ref().map(|c| c.plot.mu), "mu")?,
            };
            emit(a.out.output, service::stock(&req)?, render::stock)
        }
        Command::PathLength(a) => {
            let req = service::PathLengthRequest {
                n: a.n,
                area_m2: a.area,
                beta: a.beta,
                width_m: a.width,
                height_m: a.height,
            };
            emit(a.out.output, service::path_length(&req)?, render::path_length)
        }
        Command::Tables(a) => {
            let mut req = service::TablesRequest::reference();
            if !a.config.is_empty() {
                req.profiles = a
                    .config
                    .iter()
                    .enumerate()
                    .map(|(i, p)| inputs::load_config(p).map(|c| inputs::profile_from_config(c, i)))
                    .collect::<Result<Vec<_>>>()?;
                req.reference_method = req.profiles[0].methods[0].name.clone();
            }
            if let Some(c) = &a.core_costs {
                req.core_costs = c.clone();
            }
            if let Some(b) = &a.budgets {
                req.budgets = b.clone();
            }
            if let Some(r) = &a.reference {
                req.reference_method = r.clone();
            }
            if let Some(m) = &a.tradeoff_method {
                req.tradeoff_method = m.clone();
            }
            if let Some(n) = a.tradeoff_n {
                req.tradeoff_n = n;
            }
            emit(a.out.output, service::tables(&req)?, render::tables)
        }
    }
}
