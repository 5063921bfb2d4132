use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wasep::harness::{
    cmd_analyze, cmd_check_model, cmd_crossover_sweep, cmd_ensemble, cmd_hydro, cmd_simulate,
    run_criterion, ExperimentConfig, ExperimentKind, Overrides, CRITERIA,
};
use wasep::lattice::ModelDef;
use wasep::Result;

#[derive(Parser)]
#[command(name = "wasep", version, about = "Weakly asymmetric exclusion: simulation and limit checks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (JSON); defaults apply to absent fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "WASEP_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write the binary jump log (simulate).
    #[arg(long, global = true)]
    jump_log: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Gradient, reversibility and invariance checks of a rate model.
    CheckModel {
        /// Model JSON; overrides the config's model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// One trajectory to series.csv.
    Simulate,
    /// An ensemble of trajectories to series.csv and moments.json.
    Ensemble,
    /// Compare a finished ensemble run with the analytic targets.
    Analyze { run_dir: PathBuf },
    /// Ensemble density profile against the Burgers solution.
    Hydro,
    /// E[A_t²] over n and γ with power-law fits.
    CrossoverSweep,
    /// Run the acceptance criteria and print one line per criterion.
    RunAllAcceptance {
        /// Criterion ids to run (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn resolve(global: &Global, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let overrides = Overrides {
        seed: global.seed,
        workers: global.workers,
        out: global.out.clone(),
        jump_log: global.jump_log,
    };
    ExperimentConfig::resolve(global.config.as_deref(), kind, &overrides)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    match cli.command {
        Command::CheckModel { model } => {
            let mut cfg = resolve(g, ExperimentKind::CheckModel)?;
            if let Some(path) = model {
                cfg.model = ModelDef::load(&path)?;
            }
            let report = cmd_check_model(&cfg)?;
            print_json(&report)?;
            Ok(report.pass)
        }
        Command::Simulate => {
            let summary = cmd_simulate(&resolve(g, ExperimentKind::Simulate)?)?;
            println!("wrote {}", summary.dir.display());
            Ok(true)
        }
        Command::Ensemble => {
            let summary = cmd_ensemble(&resolve(g, ExperimentKind::Ensemble)?)?;
            println!("wrote {}", summary.dir.display());
            if !summary.manifest.failures.is_empty() {
                eprintln!("{} trajectories failed; the run is marked incomplete", summary.manifest.failures.len());
                return Ok(false);
            }
            Ok(true)
        }
        Command::Analyze { run_dir } => {
            let report = cmd_analyze(&run_dir)?;
            for c in &report.comparisons {
                println!(
                    "{:<56} {:>12.6} ± {:<10.3e} target {:>12.6} z = {:>6.2} {}",
                    c.observable,
                    c.estimate,
                    c.stderr,
                    c.target,
                    c.z_score,
                    if c.pass { "ok" } else { "FAIL" }
                );
            }
            Ok(report.all_pass())
        }
        Command::Hydro => {
            let (summary, report) = cmd_hydro(&resolve(g, ExperimentKind::Hydro)?)?;
            println!(
                "L1 at horizon {:.4} (noise floor {:.4}); t = 0 baseline {:.4}; wrote {}",
                report.at_horizon.l1,
                report.at_horizon.noise_floor,
                report.baseline.l1,
                summary.dir.display()
            );
            Ok(true)
        }
        Command::CrossoverSweep => {
            let (summary, rows) = cmd_crossover_sweep(&resolve(g, ExperimentKind::CrossoverSweep)?)?;
            for row in &rows {
                let exp = row
                    .fit
                    .as_ref()
                    .map(|f| format!("{:.3} ± {:.3}", f.exponent, f.exponent_stderr))
                    .unwrap_or_else(|| "-".into());
                println!("gamma {:<5} exponent {exp:<16} {:?}", row.gamma, row.verdict);
            }
            println!("wrote {}", summary.dir.display());
            Ok(true)
        }
        Command::RunAllAcceptance { only } => {
            let workers = g.workers.filter(|&w| w > 0).unwrap_or_else(wasep::analytics::default_workers);
            let ids: Vec<u32> = if only.is_empty() {
                CRITERIA.iter().map(|c| c.0).collect()
            } else {
                only
            };
            let mut outcomes = Vec::new();
            let mut all = true;
            for id in ids {
                let outcome = run_criterion(id, workers)?;
                println!("{}", outcome.details());
                all &= outcome.pass();
                outcomes.push(outcome);
            }
            if let Some(dir) = &g.out {
                std::fs::create_dir_all(dir).map_err(|e| wasep::Error::io(dir, e))?;
                let path = dir.join("acceptance.json");
                std::fs::write(&path, serde_json::to_string_pretty(&outcomes)? + "\n")
                    .map_err(|e| wasep::Error::io(&path, e))?;
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
