//! `lsbd`: certify a run, dump the bound ledger, or scan a coupling grid.
//!
//! Exit codes: 0 every claim passed, 1 operational error (config, I/O,
//! model), 2 certification failure.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use lsbd_core::config::RunConfig;
use lsbd_core::report::{self, Status};

const THREADS_VAR: &str = "LSBD_THREADS";

#[derive(Parser)]
#[command(name = "lsbd", version, about = "Lie-Schwinger block diagonalization with certified bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow at the configured t and check every claim.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json, spectrum.csv, steps.csv and bounds.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the bound ledger only; no matrices are built.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify every point of t_grid (and scan_sites) and report the window.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Outcome {
    Pass,
    Fail,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().with_context(|| format!("{THREADS_VAR}={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load(path: &std::path::Path) -> Result<RunConfig, lsbd_core::Error> {
    RunConfig::from_path(path)
}

fn execute(cmd: Command) -> Result<Outcome, lsbd_core::Error> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let rep = report::run(&cfg)?;
            std::fs::create_dir_all(&out)?;
            output::write_run(&rep, &out)?;
            output::print_claims(&rep.claims);
            println!("verdict: {}", if rep.passed() { "pass" } else { "fail" });
            Ok(if rep.passed() { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Bounds { config, out } => {
            let cfg = load(&config)?;
            let table = report::bound_rows(&cfg)?;
            output::write_bounds(&table, &out)?;
            println!("{} rows written to {}", table.rows.len(), out.display());
            Ok(Outcome::Pass)
        }
        Command::Scan { config, out } => {
            let cfg = load(&config)?;
            let rep = report::scan(&cfg)?;
            std::fs::create_dir_all(&out)?;
            output::write_scan(&rep, &out)?;
            for w in &rep.windows {
                println!(
                    "N={}: window {}{}",
                    w.sites,
                    w.window.map_or("none".to_string(), |t| format!("{t:e}")),
                    if w.anomaly { " (anomaly)" } else { "" }
                );
            }
            println!("analytic radius bound a/4 = {:e}", rep.radius);
            output::print_claims(&rep.claims);
            Ok(if rep.verdict == Status::Pass { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match execute(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(2),
        Err(e) if e.is_certification_failure() => {
            eprintln!("certification failure: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            let kind = match &e {
                lsbd_core::Error::Config(_) | lsbd_core::Error::Json(_) => "config",
                lsbd_core::Error::Io(_) => "io",
                lsbd_core::Error::InvalidModel(_) | lsbd_core::Error::Truncation { .. } => "model",
                _ => "error",
            };
            eprintln!("{kind} error: {e}");
            ExitCode::from(1)
        }
    }
}
