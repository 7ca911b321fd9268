use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pudwr::cli_io::{defaults_text, experiments_text, run, RunConfig};

/// Space-time adaptive PU-DWR experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a `key = value` config file.
    Run {
        config: PathBuf,
        /// Overrides of the form --key=value.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// List the shipped experiments.
    ListExperiments,
    /// Print every config key with its default value.
    PrintDefaults,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => print!("{}", experiments_text()),
        Command::PrintDefaults => print!("{}", defaults_text()),
        Command::Run { config, overrides } => {
            let cfg = match RunConfig::load(&config, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("configuration error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run(&cfg) {
                Ok(s) => eprintln!("done: {} loops in {:.1} s, output in {}", s.rows.len(), s.wall_seconds, cfg.output.display()),
                Err(e) => {
                    eprintln!("run failed: {e}");
                    return ExitCode::FAILURE;
                }
            }
        }
    }
    ExitCode::SUCCESS
}
