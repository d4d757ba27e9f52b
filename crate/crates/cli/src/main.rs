use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use fhn_cli::commands::{self, Outcome};
use fhn_cli::config::ExperimentConfig;
use fhn_cli::presets::PresetOptions;
use fhn_cli::{verify, ErrorReport, EXIT_CHECK_FAILED};
use fhn_core::{Error, Result};

#[derive(Parser)]
#[command(name = "fhnlab", version, about = "Reaction-diffusion and FitzHugh-Nagumo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for CSV and JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random initial conditions.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an experiment and write snapshots and diagnostics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Run a named preset instead of a config file.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        fast: bool,
    },
    /// Sturm-Liouville spectrum of the linearization.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep a parameter and report mode classifications.
    Bifurcate {
        #[command(flatten)]
        common: Common,
    },
    /// Run a preset and judge it.
    Reproduce {
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Half resolution and half horizon.
        #[arg(long)]
        fast: bool,
        /// Observe wave propagation over t in (500, 600).
        #[arg(long)]
        full_window: bool,
    },
    /// Run verification suites: lemmas, sturm, energy, backends, symmetry or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let path = common.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    Ok((cfg, commands::base_dir(path)))
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate { common, preset: Some(name), fast } => {
            let mut cfg = fhn_cli::presets::preset(&name, PresetOptions { fast, full_window: false })?.config;
            if let Some(seed) = common.seed {
                cfg = cfg.with_seed(seed);
            }
            let out = commands::output_dir(&cfg, common.out.as_deref());
            commands::simulate(&cfg, Path::new("."), &out)
        }
        Command::Simulate { common, preset: None, .. } => {
            let (cfg, base) = load(&common)?;
            let out = commands::output_dir(&cfg, common.out.as_deref());
            commands::simulate(&cfg, &base, &out)
        }
        Command::Spectrum { common } => {
            let (cfg, base) = load(&common)?;
            let out = commands::output_dir(&cfg, common.out.as_deref());
            commands::spectrum(&cfg, &base, &out)
        }
        Command::Bifurcate { common } => {
            let (cfg, base) = load(&common)?;
            let out = commands::output_dir(&cfg, common.out.as_deref());
            commands::bifurcate(&cfg, &base, &out)
        }
        Command::Reproduce { preset, out, fast, full_window } => {
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(&preset));
            commands::reproduce(&preset, PresetOptions { fast, full_window }, &out)
        }
        Command::Verify { suite, out } => {
            let report = verify::run(&suite)?;
            let summary = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("verify.json"), pretty(&summary))?;
            }
            Ok(Outcome { pass: report.pass, summary })
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("FHN_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // a second initialization only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match dispatch(cli) {
        Ok(outcome) => {
            println!("{}", pretty(&outcome.summary));
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED as u8)
            }
        }
        Err(err) => {
            let report = ErrorReport::new(&err);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| err.to_string()));
            ExitCode::from(report.exit_code as u8)
        }
    }
}
