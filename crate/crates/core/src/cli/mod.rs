//! Command-line driver: scenario ingestion, sweeps and data export.

pub mod output;
pub mod run;
pub mod scenario;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use output::{Cell, Format, Provenance, ResultTable};
pub use run::{RunError, RunOptions};
pub use scenario::{Scenario, ScenarioError};

#[derive(Debug, Parser)]
#[command(
    name = "condsqueeze",
    version,
    about = "Conditional squeezing under continuous measurement and spring-shifting feedback"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full record at a single parameter point, with the numeric cross-check.
    Point(CommonArgs),
    /// Covariance over the scenario grid, one file per feedback ratio.
    Sweep(CommonArgs),
    /// Squeezing thresholds in cooperativity (and photons, when mapped).
    Thresholds(CommonArgs),
    /// Second-mode variance bounds against photon number.
    Bounds(CommonArgs),
    /// Noise spectra and optimal filters.
    Spectra(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario file, or the name of a bundled scenario
    /// (fig2, fig3a, fig3b, fig4, membrane).
    #[arg(long)]
    pub scenario: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Fraction of sweep points re-checked against the numeric integral.
    #[arg(long, default_value_t = 0.01)]
    pub verify_fraction: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Parameter override `key=value` (eta, C, n_th, Q, ratio, gain, n_cav).
    #[arg(long = "set", value_parser = parse_override)]
    pub overrides: Vec<(String, f64)>,
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (key, value) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("bad value for `{key}`: {e}"))?;
    Ok((key.trim().to_string(), value))
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Point(_) => "point",
            Command::Sweep(_) => "sweep",
            Command::Thresholds(_) => "thresholds",
            Command::Bounds(_) => "bounds",
            Command::Spectra(_) => "spectra",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Point(a)
            | Command::Sweep(a)
            | Command::Thresholds(a)
            | Command::Bounds(a)
            | Command::Spectra(a) => a,
        }
    }
}

/// Runs a parsed command, writing output files and returning their paths.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, RunError> {
    let args = cli.command.args();
    if !(0.0..=1.0).contains(&args.verify_fraction) {
        return Err(RunError::Validation(format!(
            "--verify-fraction must lie in [0, 1], got {}",
            args.verify_fraction
        )));
    }
    if args.workers == Some(0) {
        return Err(RunError::Validation("--workers must be at least 1".into()));
    }
    let scenario = Scenario::load(&args.scenario)?;
    let options = RunOptions {
        out: args.out.clone(),
        format: args.format,
        verify_fraction: args.verify_fraction,
        overrides: args.overrides.clone(),
        command: cli.command.name().into(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Validation(format!("cannot start worker pool: {e}")))?;
    let start = std::time::Instant::now();
    pool.install(|| {
        let stamp = |summary: &mut run::RunSummary| {
            let elapsed = format!("{:.3}", start.elapsed().as_secs_f64());
            for (_, t) in &mut summary.tables {
                t.provenance.push("wall_clock_s", elapsed.clone());
            }
        };
        match &cli.command {
            Command::Point(_) => {
                let (mut table, mismatch) = run::run_point(&scenario, &options)?;
                table.provenance.push("wall_clock_s", format!("{:.3}", start.elapsed().as_secs_f64()));
                let path = table.save(&options.out, &format!("{}_point", scenario.name), options.format)?;
                match mismatch {
                    Some(first) => Err(RunError::Consistency { count: 1, first }),
                    None => Ok(vec![path]),
                }
            }
            Command::Sweep(_) | Command::Thresholds(_) | Command::Bounds(_) => {
                let mut summary = match &cli.command {
                    Command::Sweep(_) => run::run_sweep(&scenario, &options)?,
                    Command::Thresholds(_) => run::run_thresholds(&scenario, &options)?,
                    _ => run::run_bounds(&scenario, &options)?,
                };
                stamp(&mut summary);
                let paths = summary.save(&options.out, options.format)?;
                summary.into_result().map(|_| paths)
            }
            Command::Spectra(_) => run::run_spectra(&scenario, &options),
        }
    })
}
