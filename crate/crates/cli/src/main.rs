use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mimfd_cli::run::{cmd_forward, cmd_invert, stop_name};
use mimfd_cli::tables::{default_base, run_table, Table};
use mimfd_cli::verify::run_suite;
use mimfd_cli::{CliError, RunConfig};

/// Forward solves, source reconstruction and table sweeps for the
/// mobile-immobile time-fractional diffusion model.
///
/// Exit codes: 0 success, 1 config, 2 solver, 3 IO, 4 line search failure,
/// 5 failed verification.
#[derive(Parser, Debug)]
#[command(name = "mimfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the forward problem with the configured true source.
    Forward {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct the source from (synthetic or loaded) observations.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Seed sweep over the rows of table 1, 2 or 3.
    Tables {
        which: u32,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        /// Base configuration; Example 1 with conjugate directions if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads, 0 for all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run a verification suite: duhamel, convergence or gradient.
    Verify { suite: String },
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::from_file(path)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Forward { config, out } => {
            let dir = cmd_forward(&load(&config)?, out.as_deref())?;
            println!("frames written to {}", dir.display());
        }
        Command::Invert { config, out, seed } => {
            let mut c = load(&config)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            let o = cmd_invert(&c, out.as_deref())?;
            println!(
                "Error {:.6e}  Loss {:.6e}  iterations {}  stop {}",
                o.error,
                o.loss,
                o.state.iterations(),
                stop_name(o.state.stop)
            );
        }
        Command::Tables {
            which,
            seeds,
            config,
            out,
            seed,
            jobs,
        } => {
            let table = Table::from_number(which)?;
            let base = match config {
                Some(p) => load(&p)?,
                None => default_base(),
            };
            let result = run_table(table, &base, seeds, seed, jobs)?;
            print!("{}", result.summary_csv());
            for p in result.write(&out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Verify { suite } => {
            let report = run_suite(&suite)?;
            for line in &report.lines {
                println!("{line}");
            }
            if !report.passed() {
                return Err(CliError::Verification(report.failures.join("; ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
