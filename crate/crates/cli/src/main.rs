//! Command-line front end: simulate sample paths, test data files, rebuild
//! critical-value tables, and drive Monte Carlo experiments.
//!
//! Exit codes: 0 on success, 1 on any error, 2 when `test` rejects at the
//! 5% level (so shell pipelines can branch on the verdict).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use specgof::critvals::{
    brownian_quantiles, BrownianFunctional, CriticalValues, DEFAULT_LEVELS,
};
use specgof::error::{GofError, Result};
use specgof::gof::{transformed_process, transformed_process_tapered, Variant};
use specgof::io;
use specgof::mc::{render_report, run_experiment, McConfig, ReportFormat, StatisticSpec};
use specgof::models::SpectralFamily;
use specgof::residuals::family_residuals;
use specgof::sim::{simulate, DgpKind, DgpSpec};
use specgof::spectral::{periodogram, tapered_periodogram};
use specgof::stats::{
    box_pierce, cvm_stat, directional_stat, drift_l, ell_coefficients, ks_stat,
    smooth_stat, TestReport,
};
use specgof::whittle;

/// Grid for the drift curve behind directional statistics.
const DRIFT_GRID: usize = 1_024;

#[derive(Parser)]
#[command(
    name = "specgof",
    version,
    about = "Goodness-of-fit tests for linear processes in the frequency domain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample path from a built-in process and print it, one value
    /// per line.
    Simulate(SimulateArgs),
    /// Fit a spectral family to a data file and run goodness-of-fit tests.
    Test(TestArgs),
    /// Simulate Brownian-functional critical value tables.
    Critvals(CritvalsArgs),
    /// Run a Monte Carlo experiment described by a JSON config file.
    Mc(McArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Process kind: iid, ar1, ma1, arma11, arfima or arfima1d0.
    #[arg(long)]
    model: String,
    /// Comma-separated process parameters, e.g. 0.2 or 0.5,0.2.
    #[arg(long, default_value = "")]
    params: String,
    /// Sample size.
    #[arg(long = "T")]
    t: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    /// Data file: text with one value per line, or the binary series format.
    data: PathBuf,
    /// Null family: ar1, ma1 or arfima.
    #[arg(long)]
    family: String,
    /// Residual recursion: forward, backward or tapered.
    #[arg(long, default_value = "forward")]
    variant: String,
    /// Comma-separated statistics: ks, cvm, w:N, psi:N, q:N.
    #[arg(long, default_value = "ks,cvm")]
    stats: String,
    /// Critical-value table file; the bundled table when omitted.
    #[arg(long)]
    critvals: Option<PathBuf>,
}

#[derive(Args)]
struct CritvalsArgs {
    /// One of sup_abs_brownian, int_sq_brownian, int_sq_bridge; all three
    /// when omitted.
    #[arg(long)]
    functional: Option<String>,
    /// Simulated paths (the bundled table uses 1000000).
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Time-grid steps per path (the bundled table uses 16384).
    #[arg(long, default_value_t = 1_024)]
    grid: usize,
    /// Simulation seed (the bundled table's seed by default).
    #[arg(long, default_value_t = 2_005_113_371)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// Experiment description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Critical-value table file; the bundled table when omitted.
    #[arg(long)]
    critvals: Option<PathBuf>,
    /// Report file; a .md suffix renders markdown, anything else CSV.
    /// Standard output (CSV) when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let requested = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp
                    | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if requested { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_worker_cap()?;
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Test(args) => cmd_test(args),
        Command::Critvals(args) => cmd_critvals(args),
        Command::Mc(args) => cmd_mc(args),
    }
}

/// SPECGOF_THREADS caps the worker pool; results never depend on it.
fn init_worker_cap() -> Result<()> {
    let raw = match std::env::var("SPECGOF_THREADS") {
        Ok(raw) => raw,
        Err(_) => return Ok(()),
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        GofError::InvalidConfig(format!("SPECGOF_THREADS={raw:?} is not a thread count"))
    })?;
    if n == 0 {
        return Err(GofError::InvalidConfig(
            "SPECGOF_THREADS must be at least 1".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| GofError::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(())
}

fn parse_params(text: &str) -> Result<Vec<f64>> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(vec![]);
    }
    trimmed
        .split(',')
        .map(|p| {
            p.trim().parse().map_err(|_| {
                GofError::Parse(format!("parameter '{}' is not a number", p.trim()))
            })
        })
        .collect()
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<()> {
    use std::io::Write;
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(text.as_bytes())?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn load_critvals(path: &Option<PathBuf>) -> Result<std::borrow::Cow<'static, CriticalValues>> {
    Ok(match path {
        Some(p) => std::borrow::Cow::Owned(CriticalValues::from_file(p)?),
        None => std::borrow::Cow::Borrowed(CriticalValues::bundled()),
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let kind = DgpKind::from_name(&args.model)?;
    let spec = DgpSpec::new(kind, parse_params(&args.params)?, args.t, args.seed);
    let x = simulate(&spec)?;
    let mut buf = Vec::new();
    io::write_text(&mut buf, &x)?;
    write_output(&args.out, std::str::from_utf8(&buf).expect("ascii floats"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_test(args: TestArgs) -> Result<ExitCode> {
    let x = io::read_series(&args.data)?;
    let family = SpectralFamily::from_name(&args.family)?;
    let cv = load_critvals(&args.critvals)?;

    let requested: Vec<StatisticSpec> = args
        .stats
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(StatisticSpec::from_token)
        .collect::<Result<_>>()?;
    if requested.is_empty() {
        return Err(GofError::InvalidConfig("no statistics requested".into()));
    }
    if requested.iter().any(|s| matches!(s, StatisticSpec::C0)) {
        return Err(GofError::InvalidConfig(
            "c0 tests a fully specified null; it is only available in Monte Carlo \
             runs, where the generating parameter is known"
                .into(),
        ));
    }

    let pg = match args.variant.as_str() {
        "forward" | "backward" => periodogram(&x)?,
        "tapered" => tapered_periodogram(&x)?,
        other => {
            return Err(GofError::Parse(format!(
                "unknown variant {other:?}; expected forward, backward or tapered"
            )))
        }
    };
    let fit = whittle::fit(&pg, &family)?;
    let beta = match args.variant.as_str() {
        "forward" => transformed_process(&pg, &family, &fit, Variant::Forward)?,
        "backward" => transformed_process(&pg, &family, &fit, Variant::Backward)?,
        _ => transformed_process_tapered(&pg, &family, &fit)?,
    };

    let mut any_reject = false;
    let mut lines = String::new();
    for stat in &requested {
        let report: TestReport = match stat {
            StatisticSpec::Ks => ks_stat(&beta, &cv)?,
            StatisticSpec::Cvm => cvm_stat(&beta, &cv)?,
            StatisticSpec::Smooth { n } => smooth_stat(&beta, *n)?,
            StatisticSpec::Directional { n, direction, tail } => {
                let curve = drift_l(
                    &family,
                    &fit.theta_hat,
                    |lambda| direction.score(lambda),
                    DRIFT_GRID,
                )?;
                directional_stat(&beta, &ell_coefficients(&curve, *n)?, *tail)?
            }
            StatisticSpec::Portmanteau { n } => {
                let resid =
                    family_residuals(family.kind(), &x, fit.theta_hat.values()[0])?;
                box_pierce(&resid, *n)?
            }
            StatisticSpec::C0 => unreachable!("rejected above"),
        };
        any_reject |= report.reject_5pct;
        lines.push_str(&report.to_json());
        lines.push('\n');
    }
    write_output(&None, &lines)?;
    Ok(if any_reject { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_critvals(args: CritvalsArgs) -> Result<ExitCode> {
    let text = match &args.functional {
        Some(name) => {
            let functional = BrownianFunctional::from_name(name)?;
            let table = brownian_quantiles(
                functional,
                DEFAULT_LEVELS,
                args.paths,
                args.grid,
                args.seed,
            )?;
            serde_json::to_string_pretty(&table).expect("serializing table")
        }
        None => CriticalValues::generate(DEFAULT_LEVELS, args.paths, args.grid, args.seed)?
            .to_json(),
    };
    write_output(&args.out, &text)?;
    if args.out.is_none() {
        write_output(&None, "\n")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_mc(args: McArgs) -> Result<ExitCode> {
    let mut cfg = McConfig::from_file(&args.config)?;
    if let Some(reps) = args.reps {
        cfg.replications = reps;
        cfg.validate()?;
    }
    let cv = load_critvals(&args.critvals)?;
    let report = run_experiment(&cfg, &cv)?;
    let format = match &args.out {
        Some(p) if p.extension().is_some_and(|e| e == "md") => ReportFormat::Markdown,
        _ => ReportFormat::Csv,
    };
    write_output(&args.out, &render_report(&report, format)?)?;
    Ok(ExitCode::SUCCESS)
}
