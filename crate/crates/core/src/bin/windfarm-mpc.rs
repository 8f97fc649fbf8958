use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use windfarm_mpc::harness::{load_scenario, run, sweep, write_outputs};
use windfarm_mpc::mpc::ControllerMode;

#[derive(Parser)]
#[command(version, about = "Closed-loop wind-farm MPC scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its result files.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Freestream seed (overrides `wind.seed`).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["proposed", "baseline", "tracking-only"])]
        mode: Option<String>,
    },
    /// Run the scenario for every (w, s) pair of the two lists.
    Sweep {
        config: PathBuf,
        /// Comma-separated load-rate weights.
        #[arg(long, value_delimiter = ',', required = true)]
        w: Vec<f64>,
        /// Comma-separated split factors.
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<f64>,
        /// Where to write `sweep.csv` (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> windfarm_mpc::Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, seed, mode } => {
            let mut cfg = load_scenario(&config)?;
            if let Some(seed) = seed {
                cfg.wind.seed = seed;
            }
            if let Some(mode) = mode {
                cfg.mpc.mode = mode.parse::<ControllerMode>()?;
            }
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            let bundle = run(&cfg)?;
            write_outputs(&bundle, &cfg.output.dir)?;
            let r = &bundle.report;
            println!(
                "{} steps, {} turbines: rms {:.4e} W, dF {:.4e} N, eF {:.4e} N, {} failed solves -> {}",
                bundle.steps(),
                bundle.turbines(),
                r.rms_tracking_error,
                r.df,
                r.ef,
                bundle.failures,
                cfg.output.dir.display()
            );
            if let Err(e) = bundle.check() {
                eprintln!("error: {e}; partial results written");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, w, s, out } => {
            let cfg = load_scenario(&config)?;
            let grid: Vec<(f64, f64)> = w.iter().flat_map(|&w| s.iter().map(move |&s| (w, s))).collect();
            let table = sweep(&cfg, &grid)?;
            let dir = out.unwrap_or(cfg.output.dir);
            std::fs::create_dir_all(&dir).map_err(|e| windfarm_mpc::Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let csv = table.to_csv();
            let path = dir.join("sweep.csv");
            std::fs::write(&path, &csv).map_err(|e| windfarm_mpc::Error::Io { path, source: e })?;
            print!("{csv}");
            if table.rows.iter().any(|r| r.aborted) {
                eprintln!("error: at least one sweep cell was aborted");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
