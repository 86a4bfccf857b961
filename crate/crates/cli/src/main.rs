use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isaacs_core::config::{Mode, RunConfig};
use isaacs_core::run::run;

/// Monotone finite-difference solver for elliptic Isaacs equations.
#[derive(Parser)]
#[command(name = "isaacs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem on one grid.
    Solve(Common),
    /// Grid-convergence study on a manufactured case.
    Rates(Common),
    /// Truncated-pair study over increasing K.
    Sandwich(Common),
    /// Decompose random elliptic matrices on the configured stencil.
    CheckDecomposition(Common),
    /// Tune and verify the barrier function.
    VerifyBarrier(Common),
    /// Run the mode named in the configuration file.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(short = 'j', long)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Solve(c) => (Some(Mode::Solve), c),
        Command::Rates(c) => (Some(Mode::Rates), c),
        Command::Sandwich(c) => (Some(Mode::Sandwich), c),
        Command::CheckDecomposition(c) => (Some(Mode::CheckDecomposition), c),
        Command::VerifyBarrier(c) => (Some(Mode::VerifyBarrier), c),
        Command::Run(c) => (None, c),
    };
    let level = match common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = RunConfig::load(&common.config).and_then(|c| run(&c, mode, common.out.as_deref()));
    match result {
        Ok(outcome) => {
            println!("{}: {}", outcome.mode.name(), outcome.headline);
            for p in &outcome.artifacts {
                println!("  wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
