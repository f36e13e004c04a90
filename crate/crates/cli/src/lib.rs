//! Batch front end for kf-core: config parsing, dispatch and the artifact cache.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

pub use config::{cache_key, parse_config, Command, RunConfig};
pub use error::{CliError, CliResult};

use cache::{write_artifacts, Cache};

/// Where the cache lives: the config's `cache_dir`, else the environment variable.
pub fn cache_root(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.cache_dir.clone().or_else(|| std::env::var_os(config::CACHE_ENV).map(PathBuf::from))
}

/// Run one command and write its artifacts. Returns whether `validate` passed.
pub fn run(cfg: &RunConfig, command: Command, use_cache: bool) -> CliResult<bool> {
    // validate reports a status, so it always recomputes
    let cache = match cache_root(cfg) {
        Some(root) if use_cache && command != Command::Validate => Some(Cache::open(root)?),
        _ => None,
    };
    let key = cache_key(cfg, command);
    if let Some(c) = &cache {
        if let Some(artifacts) = c.lookup(&key)? {
            log::info!("cache hit {key} for {}", command.name());
            write_artifacts(&cfg.output.dir, &artifacts)?;
            return Ok(true);
        }
        log::info!("cache miss {key} for {}", command.name());
    }
    let outcome = commands::dispatch(cfg, command)?;
    write_artifacts(&cfg.output.dir, &outcome.artifacts)?;
    if let Some(c) = &cache {
        c.store(&key, &outcome.artifacts)?;
    }
    if command == Command::Validate {
        if let Some(text) = outcome.artifacts.iter().find(|a| a.name == "validate.txt") {
            print!("{}", String::from_utf8_lossy(&text.bytes));
        }
    }
    Ok(outcome.passed)
}
