//! `axblab`: run a verification suite and write its residual report.
//!
//! Exit status is 0 when every check passes, 1 when any check fails and 2
//! for configuration or usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use axblab_core::report::ResidualReport;
use axblab_core::suites::{run_suite, Suite, SuiteConfig};
use axblab_core::twist::Orientation;
use axblab_core::Error;
use clap::{Parser, Subcommand};

/// Environment variable capping the worker threads.
const THREADS_VAR: &str = "AXBLAB_THREADS";

#[derive(Parser)]
#[command(name = "axblab", version, about = "Numerical verification suites for the quantum ax+b group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite: group, twist, generators, deform, fourier or all.
    Run {
        suite: String,
        /// TOML configuration; defaults apply to every omitted key.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the configured action orientation (paper or reproducing).
        #[arg(long)]
        orientation: Option<String>,
    },
}

fn init_threads() -> Result<usize, Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(rayon::current_num_threads());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))?;
    Ok(n)
}

fn configure(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    orientation: Option<String>,
) -> Result<SuiteConfig, Error> {
    let mut cfg = match config {
        Some(path) => SuiteConfig::from_path(&path)?,
        None => SuiteConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.output.dir = out;
    }
    if let Some(o) = orientation {
        cfg.twist.orientation = o.parse::<Orientation>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &ResidualReport, written: &[PathBuf]) {
    for c in &report.checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        println!("{status}  {:<42} residual {:<12.4e} tolerance {:.1e}", c.id, c.residual, c.tolerance);
    }
    let failed = report.failures().count();
    println!("{} checks, {} failed", report.checks.len(), failed);
    for p in written {
        println!("wrote {}", p.display());
    }
}

fn run(suite: String, cfg: SuiteConfig) -> Result<bool, Error> {
    suite.parse::<Suite>()?;
    let report = run_suite(&suite, &cfg)?;
    let written = report.emit(&cfg.output.dir, &cfg.output.formats)?;
    print_summary(&report, &written);
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { suite, config, seed, out, orientation } = cli.command;
    let outcome = init_threads().and_then(|_| configure(config, seed, out, orientation)).and_then(|cfg| run(suite, cfg));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("axblab: {e}");
            ExitCode::from(2)
        }
    }
}
