use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use iov_sim::experiment::{self, ExperimentOptions, MobilitySource, ModeKind, Sweep};
use iov_sim::metrics::FairnessMode;
use iov_sim::scenario::{load_config, ScenarioConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Any,
    Selective,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FairnessArg {
    TimeMean,
    PerTick,
}

/// Sweep Sybil attack proportions and modes over several seeds and export
/// metrics and plot data. Log verbosity follows RUST_LOG.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// Scenario TOML; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cabspotting directory or normalized trace CSV.
    #[arg(long, conflicts_with = "synthetic")]
    trace: Option<PathBuf>,
    /// Seeded synthetic mobility (the default).
    #[arg(long)]
    synthetic: bool,
    /// Attack proportions in percent.
    #[arg(long, value_delimiter = ',', default_value = "0,10,20,30,40,50")]
    proportions: Vec<u32>,
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Weight of utilization against delay in the placement objective.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long, value_enum, default_value = "time-mean")]
    fairness: FairnessArg,
    /// Also write every run's tick log as NDJSON under <out>/ticks/.
    #[arg(long)]
    tick_logs: bool,
    /// Print the resolved scenario as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();

    let mut cfg = match &args.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(e) => {
                log::error!("{}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => ScenarioConfig::baseline(),
    };
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }

    if args.dump_config {
        return match cfg.to_toml_string() {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                log::error!("{e}");
                ExitCode::from(2)
            }
        };
    }

    let modes = match args.mode {
        ModeArg::Any => vec![ModeKind::Any],
        ModeArg::Selective => vec![ModeKind::Selective],
        ModeArg::Both => vec![ModeKind::Any, ModeKind::Selective],
    };
    if let Some(bad) = args.proportions.iter().find(|p| **p > 100) {
        log::error!("proportion {bad}% is above 100%");
        return ExitCode::from(2);
    }
    let opts = ExperimentOptions {
        sweep: Sweep {
            proportions_pct: args.proportions.clone(),
            modes,
        },
        seeds: args.seeds.clone(),
        mobility: args.trace.clone().map_or(MobilitySource::Synthetic, MobilitySource::Trace),
        fairness: match args.fairness {
            FairnessArg::TimeMean => FairnessMode::TimeMeanUtilization,
            FairnessArg::PerTick => FairnessMode::PerTickMean,
        },
        keep_tick_logs: args.tick_logs,
    };

    let results = match experiment::run_experiment(&cfg, &opts) {
        Ok(r) => r,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    for cell in &results.cells {
        log::info!(
            "{:<14} reopt {:>7.1}  fairness {:.4}",
            cell.key.label(),
            cell.mean_reopt().unwrap_or(f64::NAN),
            cell.mean_fairness().unwrap_or(f64::NAN),
        );
    }
    match experiment::export(&results, &args.out) {
        Ok(files) => log::info!("wrote {} files to {}", files.len() + 1, args.out.display()),
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    }
    if results.all_succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
