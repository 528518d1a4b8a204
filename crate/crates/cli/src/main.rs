//! `mcbeam`: multicast rate experiments for analog beamforming.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::{parse_snr_range, ExperimentConfig, Format, Optimizer, ScenarioChoice};
use crate::report::{CliError, ErrorKind};

const DEFAULT_EVALUATE_DB: &str = "-30:30:5";
const DEFAULT_CONVERGENCE_DB: &str = "10";
const DEFAULT_ASYMPTOTICS_DB: &str = "0:60:1";
const DEFAULT_VALIDATE_DB: &str = "-30:10:10";

#[derive(Parser, Debug)]
#[command(name = "mcbeam", version, about = "Average multicast rate under analog beamforming with statistical CSI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// AMR, asymptote and optional Monte Carlo per (method, scenario, SNR).
    Evaluate(CommonArgs),
    /// Per-iteration RM-CGD and per-generation GA traces.
    Convergence(CommonArgs),
    /// Convergence gap against the high-SNR prediction, with slope fits.
    Asymptotics(CommonArgs),
    /// Analytic AMR against the Monte Carlo oracle; fails outside 3 standard errors.
    Validate(CommonArgs),
}

#[derive(Clone, Debug)]
struct SnrRange(Vec<f64>);

impl FromStr for SnrRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_snr_range(s).map(SnrRange)
    }
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for optimizers and Monte Carlo (required except for validate).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Monte Carlo samples per point.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// SNR grid in dB as start:stop:step (inclusive) or a single value.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<SnrRange>,
    /// noncoop, coop or both.
    #[arg(long)]
    scenario: Option<ScenarioChoice>,
    /// Repeat or comma-separate to select several.
    #[arg(long, value_enum, value_delimiter = ',')]
    optimizer: Vec<Optimizer>,
}

impl CommonArgs {
    fn resolve(&self, default_snr: &str) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(n) = self.mc_samples {
            cfg.mc_samples = Some(n);
        }
        if let Some(s) = &self.snr_db {
            cfg.snr_db = Some(s.0.clone());
        }
        if cfg.snr_db.is_none() {
            cfg.snr_db = Some(parse_snr_range(default_snr).expect("default grid parses"));
        }
        if let Some(s) = self.scenario {
            cfg.scenarios = s.0.to_vec();
        }
        if !self.optimizer.is_empty() {
            let mut v = Vec::new();
            for o in &self.optimizer {
                if !v.contains(o) {
                    v.push(*o);
                }
            }
            cfg.optimizers = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::new(ErrorKind::Usage, "--seed is required for this command").with_field(Some("seed".into())))
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (args, name, default_snr) = match &cli.command {
        Command::Evaluate(a) => (a, "evaluate", DEFAULT_EVALUATE_DB),
        Command::Convergence(a) => (a, "convergence", DEFAULT_CONVERGENCE_DB),
        Command::Asymptotics(a) => (a, "asymptotics", DEFAULT_ASYMPTOTICS_DB),
        Command::Validate(a) => (a, "validate", DEFAULT_VALIDATE_DB),
    };
    let seed = match cli.command {
        Command::Validate(_) => args.seed.unwrap_or(0),
        _ => args.require_seed()?,
    };
    let cfg = args.resolve(default_snr)?;
    let ctx = Context::new(cfg, seed, name)?;
    match cli.command {
        Command::Evaluate(_) => commands::evaluate(&ctx),
        Command::Convergence(_) => commands::convergence(&ctx),
        Command::Asymptotics(_) => commands::asymptotics(&ctx),
        Command::Validate(_) => commands::validate(&ctx),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::new(ErrorKind::Usage, e.render().to_string().trim_end());
            eprintln!("{}", err.to_json());
            std::process::exit(err.exit_code());
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
