//! Command-line front end for `segpower-core`.
//!
//! [`run`] parses arguments, dispatches the subcommand and writes the report,
//! returning the process exit code: 0 on success, 2 for usage errors (bad
//! flags or parameters) and 3 for data errors (unreadable input, degenerate
//! series, failed fits).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use segpower_core::covspec::{CovariateSpec, ProbabilityGrid};
use segpower_core::power::{compute_power, fit_segmented, posthoc_power, power_design, sample_size, PowerRequest};
use segpower_core::pscore::SegmentKind;
use segpower_core::report::{run_tests, Method, TestOptions};
use segpower_core::simlab::{table2_scenarios, table3_scenarios, SimConfig, TestKind};
use segpower_core::{Alternative, Error};

pub mod ingest;
mod render;

pub use ingest::{ingest_series, parse_series, IngestError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Seed used when neither `--seed` nor `SEGPOWER_SEED` is given.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Parser)]
#[command(name = "segpower", version, about = "Changepoint tests and power analysis for segmented regression")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a series for a single changepoint.
    Test(TestArgs),
    /// Power of the pseudo-score test at a given sample size.
    Power(PowerArgs),
    /// Smallest sample size reaching a target power.
    Samplesize(SampleSizeArgs),
    /// Power at the estimates of a fitted broken-line model.
    Posthoc(PosthocArgs),
    /// Monte Carlo rejection rates.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV with a `y` column and optional `z`, `label`, `b` columns.
    pub input: PathBuf,
    #[arg(long, default_value = "both")]
    pub method: Method,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "two-sided")]
    pub alternative: Alternative,
    /// Segmented term used by the pseudo-score test.
    #[arg(long, default_value = "jump")]
    pub kind: SegmentKind,
    /// Number of candidate changepoints averaged by the pseudo-score test.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Known error variance; estimated from the null fit when omitted.
    #[arg(long)]
    pub dispersion: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Covariate specification, e.g. `equispaced` or `normal(5,1.5)`.
    #[arg(long = "z", default_value = "equispaced")]
    pub z: CovariateSpec,
    #[arg(long)]
    pub psi: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value = "two-sided")]
    pub alternative: Alternative,
    /// Probability grid used to realize distributional covariates.
    #[arg(long, default_value = "trimmed")]
    pub grid: ProbabilityGrid,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub design: DesignArgs,
}

#[derive(Debug, Args)]
pub struct SampleSizeArgs {
    /// Target power.
    #[arg(long = "power")]
    pub target: f64,
    #[command(flatten)]
    pub design: DesignArgs,
}

#[derive(Debug, Args)]
pub struct PosthocArgs {
    /// CSV with `y` and `z` columns; without `z` the time index is used.
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value = "two-sided")]
    pub alternative: Alternative,
    /// Number of resampling draws for the power interval (0 disables it).
    #[arg(long, default_value_t = 500)]
    pub ci_draws: usize,
    #[arg(long, env = "SEGPOWER_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Gaussian jump model, P.Score and W.
    Table2,
    /// Rasch response model, P.Score and L.
    Table3,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<Preset>,
    /// TOML experiment description.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replicates per cell (presets only).
    #[arg(long, default_value_t = 1000, conflicts_with = "config")]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05, conflicts_with = "config")]
    pub alpha: f64,
    /// Comma-separated tests (presets only), e.g. `pscore,w`.
    #[arg(long, value_delimiter = ',', conflicts_with = "config")]
    pub tests: Vec<TestKind>,
    #[arg(long, env = "SEGPOWER_SEED")]
    pub seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Compute(Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Compute(e) if is_parameter_error(e) => EXIT_USAGE,
            CliError::Ingest(_) | CliError::Compute(_) | CliError::Io(_) => EXIT_DATA,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

/// Errors caused by flag values rather than by the data.
fn is_parameter_error(e: &Error) -> bool {
    matches!(
        e,
        Error::PsiOutOfRange { .. }
            | Error::TargetBelowSize { .. }
            | Error::UnsupportedAlpha(_)
            | Error::Parse { .. }
            | Error::Config(_)
    )
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let format = cli.output;
    let text = match &cli.command {
        Command::Test(a) => {
            check_alpha(a.alpha)?;
            let series = ingest_series(&a.input)?;
            let opts = TestOptions {
                method: a.method,
                alpha: a.alpha,
                alternative: a.alternative,
                kind: a.kind,
                k: a.k,
                dispersion: a.dispersion,
            };
            render::test_report(&run_tests(&series, &opts)?, format)?
        }
        Command::Power(a) => {
            let req = power_request(PowerRequest::at_n(a.n, a.design.z.clone(), a.design.psi, a.design.delta, a.design.sigma), &a.design)?;
            render::power(&compute_power(&req)?, format)?
        }
        Command::Samplesize(a) => {
            let req = power_request(
                PowerRequest::for_target(a.target, a.design.z.clone(), a.design.psi, a.design.delta, a.design.sigma),
                &a.design,
            )?;
            render::sample_size(&sample_size(&req)?, format)?
        }
        Command::Posthoc(a) => {
            check_alpha(a.alpha)?;
            let series = ingest_series(&a.input)?;
            let z = series.covariate();
            let x = power_design(&z, None)?;
            let fit = fit_segmented(&series.y, &x, &z)?;
            let draws = (a.ci_draws > 0).then_some(a.ci_draws);
            let result = posthoc_power(&fit, &z, &x, a.alpha, a.alternative, draws, a.seed.unwrap_or(DEFAULT_SEED))?;
            render::posthoc(&result, format)?
        }
        Command::Simulate(a) => {
            let table = simulate(a)?;
            let text = render::rejection_table(&table, format)?;
            if let Some(path) = &a.out {
                std::fs::write(path, text)?;
                return Ok(());
            }
            text
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn power_request(req: PowerRequest, d: &DesignArgs) -> Result<PowerRequest, CliError> {
    check_alpha(d.alpha)?;
    let mut req = req.with_alpha(d.alpha).with_alternative(d.alternative);
    req.grid = d.grid;
    Ok(req)
}

fn simulate(a: &SimulateArgs) -> Result<segpower_core::simlab::RejectionTable, CliError> {
    let mut config = match (&a.config, a.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            SimConfig::from_toml_str(&text)?
        }
        (None, Some(preset)) => {
            check_alpha(a.alpha)?;
            if a.reps == 0 {
                return Err(CliError::Usage("--reps must be positive".into()));
            }
            let (scenarios, default_tests) = match preset {
                Preset::Table2 => (table2_scenarios(), vec![TestKind::PScore, TestKind::W]),
                Preset::Table3 => (table3_scenarios(), vec![TestKind::PScore, TestKind::L]),
            };
            let tests = if a.tests.is_empty() { default_tests } else { a.tests.clone() };
            SimConfig {
                reps: a.reps,
                alpha: a.alpha,
                seed: None,
                tests,
                scenarios,
            }
        }
        (None, None) => return Err(CliError::Usage("either --preset or --config is required".into())),
    };
    if let Some(seed) = a.seed {
        config.seed = Some(seed);
    }
    Ok(config.run(DEFAULT_SEED)?)
}
