//! `thickflow` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thickflow_core::config::{parse_config, Config};
use thickflow_core::harness::{
    dump_banks, run_experiment, run_sweep_experiment, verify, HarnessError, Policy, RunOptions, EXIT_CONFIG,
};

#[derive(Parser)]
#[command(name = "thickflow", version, about = "Compressible power-law fluids and their shear-constrained limits")]
struct Cli {
    /// Sweep members run concurrently (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory, overriding `output_dir` in the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Suppress the per-check summary.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the model described by a config file.
    Run { config: PathBuf },
    /// Run the config's [sweep] block.
    Sweep { config: PathBuf },
    /// Check the JSON reports under a directory.
    Verify {
        dir: Vec<PathBuf>,
        #[arg(long, default_value = "strict")]
        policy: String,
    },
    /// Print the seeded test banks as JSON.
    Banks { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<Config, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        EXIT_CONFIG
    })?;
    parse_config(&text).map_err(|errs| {
        eprint!("{}", HarnessError::Config(errs));
        EXIT_CONFIG
    })
}

fn execute(cli: Cli) -> i32 {
    let opts = RunOptions {
        jobs: cli.jobs,
        output: cli.output,
        quiet: cli.quiet,
    };
    let outcome = match cli.command {
        Command::Run { config } => load(&config).map(|c| run_experiment(&c, &opts)),
        Command::Sweep { config } => load(&config).map(|c| run_sweep_experiment(&c, &opts)),
        Command::Verify { dir, policy } => {
            let Some(policy) = Policy::parse(&policy) else {
                eprintln!("unknown policy `{policy}` (strict or tolerant)");
                return EXIT_CONFIG;
            };
            let summary = verify(&dir, policy);
            if !opts.quiet || summary.exit_code != 0 {
                print!("{}", summary.table);
            }
            return summary.exit_code;
        }
        Command::Banks { config } => {
            return match load(&config) {
                Ok(c) => {
                    println!("{:#}", dump_banks(&c));
                    0
                }
                Err(code) => code,
            };
        }
    };
    match outcome {
        Err(code) => code,
        Ok(Err(e)) => {
            eprintln!("{e}");
            e.exit_code()
        }
        Ok(Ok(o)) => {
            if !opts.quiet {
                eprintln!("wrote {} files to {}", o.files.len(), o.output_dir.display());
            }
            o.exit_code
        }
    }
}

fn main() -> ExitCode {
    let code = execute(Cli::parse());
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
