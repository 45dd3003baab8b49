//! Command-line front end: loads a JSON run configuration, dispatches the
//! requested solver or experiment, and writes CSV/JSON artifacts with full
//! reproducibility metadata.
//!
//! Exit codes: 0 success, 2 configuration or validation failure, 3
//! numerical failure (Riccati escape, solvability violation), 4 I/O error.

mod config;
mod output;
mod runners;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use runners::{CliError, Ctx};
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "mmfg", version, about = "Mean field game solver and simulation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the Monte Carlo seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's `output_dir` or `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model for dimensional and definiteness violations.
    Validate(RunArgs),
    /// Solve the Riccati decoupling by both routes and report residuals.
    Solve(RunArgs),
    /// Simulate the finite game, the limit system and the conditional mean.
    Simulate(RunArgs),
    /// Measure the finite-to-limit propagation-of-chaos rates.
    Chaos(RunArgs),
    /// Measure unilateral deviation gains against the equilibrium.
    Nash(RunArgs),
    /// Measure the empirical-measure convergence rate (scalar states).
    MeasureRate(RunArgs),
    /// Run the scalar two-scheme comparison example end to end.
    Example6(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Validate(a)
            | Command::Solve(a)
            | Command::Simulate(a)
            | Command::Chaos(a)
            | Command::Nash(a)
            | Command::MeasureRate(a)
            | Command::Example6(a) => a,
        }
    }

    fn variant(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Solve(_) => "solve",
            Command::Simulate(_) => "simulate",
            Command::Chaos(_) => "chaos",
            Command::Nash(_) => "nash",
            Command::MeasureRate(_) => "measure-rate",
            Command::Example6(_) => "example6",
        }
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "cannot parse {} (line {}, column {}): {e}",
            args.config.display(),
            e.line(),
            e.column()
        ))
    })?;
    if let Some(seed) = args.seed {
        config.mc.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    Ok(config)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.args();
    let config = load_config(args)?;
    let out_dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir)?;
    let ctx = Ctx {
        config: &config,
        variant: cli.command.variant(),
        out_dir: &out_dir,
    };

    let started = Instant::now();
    let verdicts = match &cli.command {
        Command::Validate(_) => runners::run_validate(&ctx)?,
        Command::Solve(_) => runners::run_solve(&ctx)?,
        Command::Simulate(_) => runners::run_simulate(&ctx)?,
        Command::Chaos(_) => runners::run_chaos(&ctx)?,
        Command::Nash(_) => runners::run_nash(&ctx)?,
        Command::MeasureRate(_) => runners::run_measure_rate(&ctx)?,
        Command::Example6(_) => runners::run_example6(&ctx)?,
    };
    eprintln!(
        "{}: done in {:.2}s, artifacts in {}",
        ctx.variant,
        started.elapsed().as_secs_f64(),
        out_dir.display()
    );
    eprintln!("verdicts: {verdicts}");
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    // The worker count only affects speed; path-level results are a pure
    // function of (seed, path index) and reductions run in fixed order.
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(threads) = std::env::var("MMFG_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            builder = builder.num_threads(n.max(1));
        }
    }
    let pool = builder.build().expect("thread pool");
    let outcome = pool.install(|| dispatch(&cli));
    if let Err(e) = outcome {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
