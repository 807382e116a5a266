//! Command line front end for the capacity laboratory.

mod bundle;
mod commands;
mod reproduce;
mod setspec;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "caplab", version, about = "Capacities and density conditions on finite metric measure spaces")]
struct Cli {
    /// Resolve relative paths against this directory.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Worker thread count; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Base RNG seed; the CAPLAB_SEED environment variable overrides it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a named space and write it with a report bundle.
    Gen(commands::GenArgs),
    /// Solve a capacity problem and certify the result.
    Cap(commands::CapArgs),
    /// Apply a potential operator to a field.
    Potential(commands::PotentialArgs),
    /// Run a capacity-density scan from a config file.
    Density(commands::DensityArgs),
    /// Compare two density notions over the same set and scales.
    Compare(commands::CompareArgs),
    /// Sweep a (gamma, s) grid for self-improvement evidence.
    Probe(commands::ProbeArgs),
    /// Run the internal invariant suite against a space file.
    Verify(verify::VerifyArgs),
    /// Re-run a pinned experiment end to end.
    Reproduce(reproduce::ReproduceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            for cause in err.chain() {
                if let Some(e) = cause.downcast_ref::<caplab_core::Error>() {
                    return ExitCode::from(if e.is_refusal() { 2 } else { 1 });
                }
            }
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(dir) = &cli.workdir {
        std::env::set_current_dir(dir)
            .map_err(|e| anyhow::anyhow!("cannot enter workdir {}: {e}", dir.display()))?;
    }
    if let Some(jobs) = cli.jobs {
        // ignore the error from a second init; the first pool wins
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let env_seed = std::env::var("CAPLAB_SEED").ok().map(|s| {
        s.parse::<u64>().map_err(|_| {
            caplab_core::Error::InvalidParameter(format!("CAPLAB_SEED {s:?} is not a u64"))
        })
    });
    let seed_override = match env_seed {
        Some(Ok(s)) => Some(s),
        Some(Err(e)) => return Err(e.into()),
        None => cli.seed,
    };
    let seed = seed_override.unwrap_or(0);
    match &cli.command {
        Command::Gen(args) => commands::run_gen(args, seed),
        Command::Cap(args) => commands::run_cap(args, seed),
        Command::Potential(args) => commands::run_potential(args, seed),
        Command::Density(args) => commands::run_density(args, seed_override),
        Command::Compare(args) => commands::run_compare(args, seed),
        Command::Probe(args) => commands::run_probe(args, seed),
        Command::Verify(args) => verify::run_verify(args, seed),
        Command::Reproduce(args) => reproduce::run_reproduce(args, seed),
    }
}
