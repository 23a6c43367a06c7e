use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csi_ppp_harness::config::{DataSource, ExperimentConfig};
use csi_ppp_harness::dataset::save_dataset;
use csi_ppp_harness::experiment::{run_experiment, run_tuning, tuning_csv, write_outputs};
use csi_ppp_harness::inspect::inspect;
use csi_ppp_harness::plot::plot_results;
use csi_ppp_harness::synthetic::SyntheticConfig;
use csi_ppp_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "csippp", version, about = "Compressive CSI feedback with plug-and-play reconstruction")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML). Relative paths inside it resolve against its directory.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set solver.lambda=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Eval,
    Calibration,
    Tuning,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic CSID1 dataset.
    Gen {
        /// Take the synthetic parameters from this split of a config file.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum, default_value = "eval")]
        split: Split,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        subcarriers: Option<usize>,
        #[arg(long)]
        antennas: Option<usize>,
        #[arg(long)]
        taps: Option<usize>,
        #[arg(long)]
        decay: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Grid-search the solver schedule per compression ratio.
    Tune(ConfigArgs),
    /// Run the full sweep and write results, traces and a manifest.
    Run(ConfigArgs),
    /// Render SVG figures from a results CSV.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Defaults to the directory holding the results CSV.
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Describe a CSID1 dataset or PPPW1 weights file.
    Inspect { path: PathBuf },
}

fn load_config(args: &ConfigArgs) -> Result<(ExperimentConfig, PathBuf, PathBuf)> {
    let cfg = ExperimentConfig::load(&args.config, &args.overrides)?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.check_paths(&base)?;
    let out = args.out_dir.clone().unwrap_or_else(|| base.join(&cfg.output_dir));
    Ok((cfg, base, out))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen { config, overrides, split, count, subcarriers, antennas, taps, decay, seed, out } => {
            let mut syn = match config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(&path, &overrides)?;
                    let (name, src) = match split {
                        Split::Eval => ("eval", Some(cfg.data.eval)),
                        Split::Calibration => ("calibration", cfg.data.calibration),
                        Split::Tuning => ("tuning", cfg.data.tuning),
                    };
                    match src {
                        Some(DataSource::Synthetic(s)) => s,
                        _ => return Err(HarnessError::config(format!("data.{name} is not a synthetic source"))),
                    }
                }
                None => SyntheticConfig::default(),
            };
            syn.count = count.unwrap_or(syn.count);
            syn.subcarriers = subcarriers.unwrap_or(syn.subcarriers);
            syn.antennas = antennas.unwrap_or(syn.antennas);
            syn.taps = taps.unwrap_or(syn.taps);
            syn.decay = decay.unwrap_or(syn.decay);
            syn.seed = seed.unwrap_or(syn.seed);
            let samples = syn.generate().map_err(|e| HarnessError::config(e.to_string()))?;
            save_dataset(&samples, &out, (syn.subcarriers, syn.antennas))
                .map_err(|source| HarnessError::Dataset { path: out.clone(), source })?;
            println!("wrote {} samples ({}x{}) to {}", samples.len(), syn.subcarriers, syn.antennas, out.display());
        }
        Command::Tune(args) => {
            let (cfg, base, out) = load_config(&args)?;
            if cfg.tuning.is_none() {
                return Err(HarnessError::config("no [tuning] section"));
            }
            let outcomes = run_tuning(&cfg, &base)?;
            std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
            let path = out.join("tuning.csv");
            std::fs::write(&path, tuning_csv(&outcomes)).map_err(|e| HarnessError::io(&path, e))?;
            for (cr, o) in &outcomes {
                let b = &o.report[o.best_index];
                println!(
                    "cr={cr} lambda={} rho0={} alpha={} nmse_db={:.3}",
                    b.lambda,
                    b.rho0,
                    b.alpha,
                    b.mean_nmse_db()
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Run(args) => {
            let (cfg, base, out) = load_config(&args)?;
            let output = run_experiment(&cfg, &base)?;
            for row in &output.results {
                println!(
                    "{:<16} cr={:<8} bits={:<4} nmse_db={:>8.3} cos={:.4}",
                    row.method,
                    row.cr,
                    row.bits.map_or("none".to_string(), |b| b.to_string()),
                    row.report.nmse_db,
                    row.report.cos
                );
            }
            for file in write_outputs(&output, &out)? {
                println!("wrote {}", file.display());
            }
            let failed = output.manifest.cells.iter().filter(|c| c.status != "ok").count();
            if failed > 0 {
                log::warn!("{failed} cell(s) failed; see manifest.toml");
            }
        }
        Command::Plot { results, traces, out_dir } => {
            let out = out_dir.unwrap_or_else(|| results.parent().map(Path::to_path_buf).unwrap_or_default());
            let summary = plot_results(&results, traces.as_deref(), &out)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Inspect { path } => print!("{}", inspect(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
