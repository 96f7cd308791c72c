use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac_tensor::harness::{emit_plot_data, run_sweep, ExperimentConfig};

/// Monte Carlo runs of the bistatic sensing and UE receivers.
#[derive(Parser)]
#[command(name = "isac", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sweep and write trials.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the additive noise.
        #[arg(long)]
        noiseless: bool,
    },
    /// Validate a config, including the identifiability conditions.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Turn a trials CSV into two-column files, one per metric.
    Plotdata {
        #[arg(long)]
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> isac_tensor::Result<()> {
    match cmd {
        Cmd::Run {
            config,
            out,
            trials,
            seed,
            noiseless,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.outputs = dir;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            cfg.noiseless |= noiseless;
            let done = run_sweep(&cfg)?;
            println!("{} trials -> {}", done.records.len(), done.trials_csv.display());
            for row in &done.summary {
                let get = |m| row.get(m).map_or(f64::NAN, |a| a.median);
                println!(
                    "{} = {:>6}: converged {}/{}  median angle rmse {:.3} deg  median SER krf {:.4} zf {:.4}",
                    row.sweep_var,
                    row.sweep_value,
                    row.converged,
                    row.trials,
                    get("angle_rmse_deg"),
                    get("ser_krf"),
                    get("ser_zf"),
                );
            }
            println!("summary -> {}", done.summary_csv.display());
        }
        Cmd::Check { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!(
                "ok: {} sweep over {} point(s), {} trial(s) each",
                cfg.sweep.variable,
                cfg.sweep_values().len(),
                cfg.trials
            );
        }
        Cmd::Plotdata { csv } => {
            for path in emit_plot_data(&csv)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
