use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lfmkit_cli::{exit_code, experiment_table, run, RunOptions};

#[derive(Parser)]
#[command(name = "lfmkit", version, about = "Run Lebesgue–Feynman measure experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a configuration file.
    Run {
        config: PathBuf,
        /// Directory for result files.
        #[arg(long, default_value = "results")]
        output_dir: PathBuf,
        /// Overrides the configuration's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Experiments run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the built-in experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListExperiments => {
            print!("{}", experiment_table());
            ExitCode::SUCCESS
        }
        Command::Run { config, output_dir, seed, jobs } => {
            let options = RunOptions { output_dir: Some(output_dir), seed, jobs };
            match run(&config, &options) {
                Ok(statuses) => {
                    for s in &statuses {
                        let status = if s.pass { "PASS" } else { "FAIL" };
                        match &s.error {
                            Some(e) => println!("{status}  {:<24} {:>8.2}s  {e}", s.label, s.wall_time_s),
                            None => println!("{status}  {:<24} {:>8.2}s", s.label, s.wall_time_s),
                        }
                    }
                    ExitCode::from(exit_code(&statuses) as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
