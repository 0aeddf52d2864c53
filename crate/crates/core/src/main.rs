use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use corrosion::io::commands::{run, Command, RunConfig};

/// Identify a nonlinear boundary flux law from Cauchy data on an accessible
/// part of the boundary.
///
/// Exit codes: 0 success, 2 configuration or input error, 3 forward solve
/// failure, 4 continuation under-resolved, 5 no monotone segment.
#[derive(Parser, Debug)]
#[command(name = "corrosion", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Configuration file (key = value, optional [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Input file for `continue` and `reconstruct` (default: inside --out).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Seed of the data noise.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Solve the forward problem; write mesh, field, Cauchy data and traces.
    Forward,
    /// Continue Cauchy data from gamma2 to gamma1.
    Continue,
    /// Recover f from continued traces on gamma1.
    Reconstruct,
    /// Forward, continue, reconstruct and compare with the true law.
    Pipeline,
    /// Noise sweep with a log-rate fit.
    Sweep,
    /// Oscillation sweep and three-spheres check.
    Check,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            process::exit(code);
        }
    };
    let Some(out) = cli.out else {
        eprintln!("error: --out DIR is required");
        process::exit(2);
    };
    let command = match cli.command {
        Cmd::Forward => Command::Forward,
        Cmd::Continue => Command::Continue,
        Cmd::Reconstruct => Command::Reconstruct,
        Cmd::Pipeline => Command::Pipeline,
        Cmd::Sweep => Command::Sweep,
        Cmd::Check => Command::Check,
    };
    let rc = RunConfig { command, config: cli.config, input: cli.input, out, seed: cli.seed, quiet: cli.quiet };
    match run(&rc) {
        Ok(summary) => {
            if !rc.quiet {
                println!("{}", summary.trim_end());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            process::exit(e.code as i32);
        }
    }
}
