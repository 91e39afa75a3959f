//! `mlve`: run the jungle expansion against its oracles and emit tables.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::Config;
use output::OutputDir;

/// Invalid invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "mlve", version, about = "Jungle expansion of log Z with oracles, bound checks and Mayer series")]
struct Cli {
    /// JSON configuration; defaults are used for anything it omits.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true, value_name = "DIR", default_value = "mlve-out")]
    out: PathBuf,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    /// Write per-term records as JSON lines (compare).
    #[arg(long, global = true)]
    trace: bool,

    /// Run a single verification suite.
    #[arg(long, global = true, value_name = "NAME")]
    suite: Option<String>,

    /// Deliberately corrupt a component to exercise failure reporting.
    #[arg(long, global = true, hide = true, value_enum)]
    inject_fault: Option<Fault>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partial sums of the expansion against the quadrature oracle.
    Compare,
    /// Run the invariant suites.
    Verify,
    /// Tree, jungle and partition counts against closed forms.
    Enumerate,
    /// Z and log Z by quadrature, with perturbative coefficients.
    Oracle,
    /// Factorial chain, M threshold and geometric bound series.
    VerifyBounds,
    /// Borel-disk membership over a grid in the complex g plane.
    DomainMap,
    /// Mayer series of a polymer gas against direct enumeration.
    Mayer,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of every Grassmann minor.
    GrassmannSign,
}

/// Shared state handed to every subcommand.
pub struct Context {
    pub config: Config,
    pub out: OutputDir,
    pub trace: bool,
    pub suite: Option<String>,
    pub fault: Option<Fault>,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = Config::load(cli.config.as_deref())?;
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(UsageError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    if let Some(name) = &cli.suite {
        if !commands::verify::SUITES.contains(&name.as_str()) {
            return Err(UsageError(format!(
                "unknown suite {name}; expected one of {}",
                commands::verify::SUITES.join(", ")
            ))
            .into());
        }
    }
    let ctx = Context {
        config,
        out: OutputDir::create(&cli.out)?,
        trace: cli.trace,
        suite: cli.suite,
        fault: cli.inject_fault,
    };
    match cli.command {
        Command::Compare => commands::compare::run(&ctx),
        Command::Verify => commands::verify::run(&ctx),
        Command::Enumerate => commands::enumerate::run(&ctx),
        Command::Oracle => commands::oracle::run(&ctx),
        Command::VerifyBounds => commands::bounds::run_verify_bounds(&ctx),
        Command::DomainMap => commands::bounds::run_domain_map(&ctx),
        Command::Mayer => commands::mayer::run(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
