//! `ricci-lab`: run curvature experiments from JSON configs.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod catalog;
mod config;
mod error;
mod experiments;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::CliError;

const DEFAULT_OUT: &str = "ricci-lab-out";

#[derive(Parser)]
#[command(name = "ricci-lab", version, about = "Numerical checks of variable Ricci curvature bounds on finite spaces")]
#[command(after_help = catalog::CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config
    #[command(after_help = catalog::CONFIG_HELP)]
    Run {
        config: PathBuf,
        /// Overrides the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the experiment catalog
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::Usage(e.to_string().trim().to_string())),
    };
    match cli.command {
        None | Some(Command::List) => {
            let mut out = std::io::stdout().lock();
            for (name, summary) in catalog::EXPERIMENTS {
                // a closed pipe is not an error for a listing
                let _ = writeln!(out, "{name:<18} {summary}");
            }
            ExitCode::SUCCESS
        }
        Some(Command::Run { config, seed, out }) => match run(config, seed, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => fail(e),
        },
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RICCI_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Usage(format!("RICCI_LAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(path: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<bool, CliError> {
    configure_threads()?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let outcome = experiments::run(&cfg)?;
    output::write_all(&dir, &cfg, &outcome)?;
    let mut passed = true;
    let mut stdout = std::io::stdout().lock();
    for r in &outcome.reports {
        passed &= r.passed();
        let _ = writeln!(
            stdout,
            "{} {}: min margin {:.3e}, tolerance {:.3e}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.min_margin,
            r.tolerance
        );
    }
    let _ = writeln!(stdout, "wrote {}", dir.display());
    Ok(passed)
}
