use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vortlab::cli::{run_experiment, ExperimentConfig, OUTPUT_ROOT_ENV};
use vortlab::presets::PRESETS;

#[derive(Parser)]
#[command(name = "vortlab", version, about = "Transport and vorticity experiments on the periodic square")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its outputs.
    Run { config: PathBuf },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// Initial-data presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Presets { action: PresetAction::List } => {
            for (name, what) in PRESETS {
                println!("{name:<14} {what}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("ok: {} (config sha256 {})", cfg.experiment, cfg.hash());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
            match run_experiment(&cfg, root.as_deref()) {
                Ok(summary) => {
                    for a in &summary.assertions {
                        println!("{} {}: {}", if a.passed { "pass" } else { "FAIL" }, a.name, a.detail);
                    }
                    println!("wrote {} files to {}", summary.files.len(), summary.directory.display());
                    if summary.passed() {
                        ExitCode::SUCCESS
                    } else {
                        for a in summary.failures() {
                            eprintln!("assertion failed: {}", a.name);
                        }
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
