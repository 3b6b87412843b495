//! Command-line driver for the qudit readout toolkit.
//!
//! Every run writes its tables to `--out-dir` together with a
//! `manifest.json` that records the config text, its SHA-256, the master
//! seed and the arguments. `replay <manifest>` reruns from that record.

pub mod catalog;
pub mod commands;
pub mod config;
pub mod emit;

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::config::{load_config, parse_config, ConfigError, RunConfig};
use crate::emit::{emit, read_manifest, sha256_hex, Format, Manifest, Table};

pub const TOOL: &str = "qudit-readout";

#[derive(Debug, Parser)]
#[command(
    name = "qudit-readout",
    version,
    about = "Dispersive readout of transmon qudits"
)]
pub struct Cli {
    /// Run configuration (TOML, frequencies in GHz).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `[run] seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Transmon levels and transition table.
    Spectrum,
    /// Dispersive shifts of the resonator.
    Shifts,
    /// Steady-state amplitudes over a drive-frequency grid.
    ReadoutSweep,
    /// Assignment matrix and error measures at one drive frequency.
    Assignment,
    /// Population posterior from assignment matrices and counts.
    Infer,
    /// Single- versus multi-frequency readout over a (kappa, sigma) grid.
    StrategyCompare,
    /// Fit and rank a table of devices.
    Catalog {
        /// Device CSV; overrides `[catalog] devices`.
        #[arg(long)]
        devices: Option<PathBuf>,
    },
    /// Rerun the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Shifts => "shifts",
            Command::ReadoutSweep => "readout-sweep",
            Command::Assignment => "assignment",
            Command::Infer => "infer",
            Command::StrategyCompare => "strategy-compare",
            Command::Catalog { .. } => "catalog",
            Command::Replay { .. } => "replay",
        }
    }

    /// Arguments that reproduce this subcommand, paths made absolute.
    fn args(&self) -> Vec<String> {
        let mut args = vec![self.name().to_string()];
        if let Command::Catalog { devices: Some(p) } = self {
            let p = std::fs::canonicalize(p).unwrap_or_else(|_| p.clone());
            args.push("--devices".into());
            args.push(p.display().to_string());
        }
        args
    }
}

fn require_config(config: Option<&RunConfig>) -> Result<&RunConfig, ConfigError> {
    config.ok_or_else(|| ConfigError::validation("config", "this subcommand needs --config"))
}

/// Runs one subcommand and returns its tables. An explicit `seed` takes
/// precedence over the config's.
pub fn compute(
    command: &Command,
    config: Option<&RunConfig>,
    seed: Option<u64>,
) -> anyhow::Result<Vec<Table>> {
    let seed = match config {
        Some(c) => c.seed(seed),
        None => seed,
    };
    match command {
        Command::Spectrum => commands::spectrum(require_config(config)?),
        Command::Shifts => commands::shifts(require_config(config)?),
        Command::ReadoutSweep => commands::readout_sweep(require_config(config)?, seed),
        Command::Assignment => commands::assignment(require_config(config)?, seed),
        Command::Infer => commands::infer(require_config(config)?, seed),
        Command::StrategyCompare => commands::strategy_compare(require_config(config)?, seed),
        Command::Catalog { devices } => {
            let path = match (devices, config) {
                (Some(p), _) => p.clone(),
                (None, Some(c)) => c
                    .raw
                    .catalog
                    .devices
                    .as_ref()
                    .map(|p| c.path(p))
                    .ok_or_else(|| {
                        ConfigError::validation("devices", "give --devices or [catalog] devices")
                    })?,
                (None, None) => {
                    return Err(ConfigError::validation(
                        "devices",
                        "give --devices or [catalog] devices",
                    )
                    .into())
                }
            };
            commands::catalog(&path)
        }
        Command::Replay { .. } => anyhow::bail!("replay cannot be nested"),
    }
}

fn execute(
    command: &Command,
    config: Option<&RunConfig>,
    seed_flag: Option<u64>,
    format: Format,
    out_dir: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    let seed = match config {
        Some(c) => c.seed(seed_flag),
        None => seed_flag,
    };
    let tables = compute(command, config, seed)?;
    let mut manifest = Manifest {
        tool: TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        args: command.args(),
        seed,
        format,
        config_sha256: config.map(|c| sha256_hex(&c.text)),
        config: config.map(|c| c.text.clone()),
        base_dir: config.map(|c| c.base_dir.clone()),
        outputs: Vec::new(),
    };
    emit(&tables, format, out_dir, &mut manifest)
}

/// Reruns a manifest into `out_dir`.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let manifest = read_manifest(manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    if manifest.tool != TOOL {
        anyhow::bail!("manifest written by {:?}, not {TOOL}", manifest.tool);
    }
    if manifest.version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest from version {}, running {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let config = match &manifest.config {
        Some(text) => {
            if manifest.config_sha256.as_deref() != Some(sha256_hex(text).as_str()) {
                anyhow::bail!("config text does not match its recorded hash");
            }
            let base = manifest.base_dir.clone().unwrap_or_default();
            Some(parse_config(text, &base)?)
        }
        None => None,
    };
    let argv = std::iter::once(TOOL.to_string()).chain(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).context("manifest arguments")?;
    if matches!(cli.command, Command::Replay { .. }) {
        anyhow::bail!("replay cannot be nested");
    }
    execute(
        &cli.command,
        config.as_ref(),
        manifest.seed,
        manifest.format,
        out_dir,
    )
}

pub fn run(cli: &Cli) -> anyhow::Result<Vec<PathBuf>> {
    if let Command::Replay { manifest } = &cli.command {
        return replay(manifest, &cli.out_dir);
    }
    let config = cli.config.as_deref().map(load_config).transpose()?;
    execute(
        &cli.command,
        config.as_ref(),
        cli.seed,
        cli.format,
        &cli.out_dir,
    )
}
