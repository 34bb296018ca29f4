use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use nanoring::fiber_modes::DispersionCache;

mod commands;
mod config;
mod output;

use commands::{CommandError, Context};
use config::{ConfigError, ScenarioConfig};

/// Collective emission of atomic nanorings around an optical nanofiber.
#[derive(Debug, Parser)]
#[command(name = "nanoring", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML); defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `outputs.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Dispersion cache file, or `off`. Defaults to `dispersion_cache.json`
    /// in the output directory.
    #[arg(long, global = true)]
    cache: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Guided-mode dispersion table `dispersion.csv`.
    Modes,
    /// Single-ring decay rates and branching ratios along λ0/d, `wavelength.csv`.
    ScanWavelength,
    /// Two-ring rates along Δz, `separation.csv` and `oscillations.json`.
    ScanSeparation,
    /// Intensity maps `pattern.{json,csv}` (fiber) and `pattern_free.{json,csv}`.
    Pattern,
    /// Two-ring Hamiltonians in the single-ring REM basis, `blocks.json`.
    TwoRingBlocks,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numeric error at {0}")]
    Numeric(#[from] CommandError),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let mut config = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(out) = cli.out {
        config.outputs.directory = out;
    }
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(ConfigError::Invalid { key: "--threads", message: "must be at least 1".into() }.into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Failure::Io(e.to_string()))?;
    }
    let dir = config.outputs.directory.clone();
    let cache = match cli.cache.as_deref() {
        Some("off") => None,
        Some(path) => Some(PathBuf::from(path)),
        None => Some(dir.join("dispersion_cache.json")),
    };
    let cache = match cache {
        Some(path) => Some(Arc::new(DispersionCache::open(path).map_err(|e| Failure::Io(e.to_string()))?)),
        None => None,
    };
    let ctx = Context::new(config, cache.clone());
    let outputs = match cli.command {
        Command::Modes => commands::modes(&ctx),
        Command::ScanWavelength => commands::scan_wavelength(&ctx),
        Command::ScanSeparation => commands::scan_separation(&ctx),
        Command::Pattern => commands::pattern(&ctx),
        Command::TwoRingBlocks => commands::two_ring_blocks(&ctx),
    }?;
    let written = outputs.commit(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    if let Some(cache) = cache {
        cache.save().map_err(|e| Failure::Io(e.to_string()))?;
    }
    Ok(written)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
