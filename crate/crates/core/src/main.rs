use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, warn};

use tauadapt::driver::{exit_code, resample_monitor, run, RunConfig};

#[derive(Parser)]
#[command(name = "tauadapt", version, about = "p-adaptive DGSEM solver for the 2D Euler equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override a config entry, e.g. `--override adapt.tau_max=1e-3`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the summary only; write no files.
        #[arg(long)]
        summary_only: bool,
    },
    /// Trim a monitor signal to whole periods, resample it uniformly and
    /// print its mean.
    Resample {
        input: PathBuf,
        column: String,
        #[arg(long, default_value_t = 20.0)]
        window: f64,
        #[arg(long, default_value_t = 4)]
        factor: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides, summary_only } => {
            let cfg = match RunConfig::load(&config, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    error!("{e}");
                    return ExitCode::from(2);
                }
            };
            match run(&cfg, !summary_only) {
                Ok(s) => {
                    print!("{}", s.render());
                    if !summary_only {
                        info!("output written to {}", cfg.output.dir.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    error!("{e}");
                    ExitCode::from(exit_code(&e) as u8)
                }
            }
        }
        Command::Resample { input, column, window, factor, output } => {
            match resample_monitor(&input, &column, window, factor, output.as_deref()) {
                Ok((path, mean, untrimmed)) => {
                    if untrimmed {
                        warn!("no period crossings found; signal averaged untrimmed");
                    }
                    info!("resampled signal written to {}", path.display());
                    println!("{mean:.12e}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    error!("{e}");
                    ExitCode::from(exit_code(&e) as u8)
                }
            }
        }
    }
}
