//! Batch driver for active quantum flock simulations.
//!
//! A run is described by a TOML file (see [`config::RunConfig`]) and produces
//! tab-separated tables plus a `metadata.json` sidecar (see [`output`]).

pub mod analysis;
pub mod config;
pub mod ensemble;
pub mod modes;
pub mod output;
pub mod scan;

use std::path::{Path, PathBuf};

/// Environment variable overriding `run.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "QFLOCK_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}", path = .path.display())]
    Read { path: PathBuf, reason: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

/// Outcome of a completed run.
#[derive(Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub bundle: output::ResultBundle,
}

pub fn load_config(path: &Path) -> Result<config::RunConfig, ConfigError> {
    let c = config::RunConfig::load(path)?;
    c.validate()?;
    Ok(c)
}

/// Output directory after applying the environment override.
pub fn output_dir(config: &config::RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => config.run.output_dir.clone(),
    }
}

/// Execute a validated configuration and write its result bundle.
pub fn run(config: &config::RunConfig) -> anyhow::Result<RunReport> {
    let threads = config.run.threads.unwrap_or_else(ensemble::default_threads);
    let start = std::time::Instant::now();
    let bundle = modes::run_mode(config, threads)?;
    let dir = output_dir(config);
    let files = output::write_bundle(&dir, config, &bundle, start.elapsed().as_secs_f64())?;
    Ok(RunReport {
        output_dir: dir,
        files,
        bundle,
    })
}
