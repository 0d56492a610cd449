//! `shom`: batch homogenization runs from JSON configurations.
//!
//! Exit status: 0 when every run converged, 2 when a run stopped at its
//! iteration cap, 1 on configuration, input or solver errors.

mod config;
mod output;
mod plot;
mod presets;
mod runner;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use runner::{Command, Options, Status};

#[derive(Parser, Debug)]
#[command(name = "shom", version, about = "FFT-based homogenization of periodic composites")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run every scheme of a configuration and write effective.csv and traces
    Run(RunArgs),
    /// Run two or more schemes and add convergence and trajectory overlays
    Compare(RunArgs),
    /// Print the built-in configurations as one JSON object
    DumpPresets {
        /// Write one <name>.json file per preset into this directory instead
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON configuration file
    config: PathBuf,
    /// Output directory, overriding the configuration
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run schemes sequentially on one thread
    #[arg(long)]
    deterministic: bool,
    /// Print iteration progress to stderr
    #[arg(short, long)]
    verbose: bool,
}

fn dump_presets(out: Option<PathBuf>) -> Result<()> {
    let presets = presets::presets();
    match out {
        None => {
            let map: serde_json::Map<String, serde_json::Value> = presets
                .into_iter()
                .map(|(name, cfg)| Ok((name.to_string(), serde_json::to_value(cfg)?)))
                .collect::<Result<_>>()?;
            println!("{}", serde_json::to_string_pretty(&map)?);
        }
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, cfg) in presets {
                let path = dir.join(format!("{name}.json"));
                fs::write(&path, serde_json::to_string_pretty(&cfg)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the configuration-error status; 2 is reserved
            // for runs that hit their iteration cap.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Cmd::Run(a) => execute(Command::Run, a),
        Cmd::Compare(a) => execute(Command::Compare, a),
        Cmd::DumpPresets { out } => dump_presets(out).map(|_| Status::Converged),
    };
    match result {
        Ok(Status::Converged) => ExitCode::SUCCESS,
        Ok(Status::MaxIter) => {
            eprintln!("shom: at least one run stopped at its iteration cap");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("shom: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(command: Command, a: RunArgs) -> Result<Status> {
    let opts = Options { out: a.out, deterministic: a.deterministic, verbose: a.verbose };
    runner::execute(command, &a.config, &opts)
}
