//! Command-line front end for the gl-lab experiments: configuration parsing,
//! command dispatch and CSV / JSON emission with a metadata sidecar.

// `!(x > 0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

use std::fs;
use std::path::PathBuf;

use serde_json::json;

pub use config::{parse_config, Command, RawConfig, RunConfig};
pub use error::CliError;
pub use format::{fmt_g17, sidecar_path, Format, Table};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "GL_LAB_THREADS";

/// Everything taken from the command line.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub command: Option<Command>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Merges the config file with command-line overrides and validates the result.
pub fn resolve_config(inv: &Invocation) -> Result<RunConfig, CliError> {
    let mut raw = match &inv.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    if let Some(cmd) = inv.command {
        match raw.get("command") {
            Some(c) if c != cmd.name() => {
                return Err(CliError::Validation(format!(
                    "command `{cmd}` conflicts with `command = {c}` in the config"
                )))
            }
            _ => raw.set("command", cmd.name()),
        }
    }
    if let Some(seed) = inv.seed {
        raw.set("seed", &seed.to_string());
    }
    RunConfig::from_raw(&raw)
}

/// Worker threads from the flag, then the environment; 0 means one per core.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<usize, CliError> {
    match (flag, env) {
        (Some(n), _) => Ok(n),
        (None, Some(v)) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
        (None, None) => Ok(0),
    }
}

pub fn execute(inv: &Invocation) -> Result<(), CliError> {
    let cfg = resolve_config(inv)?;
    let env = std::env::var(THREADS_ENV).ok();
    let threads = resolve_threads(inv.threads, env.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {threads} worker threads: {e}")))?;
    let output = pool.install(|| commands::run(&cfg))?;
    let meta = json!({
        "artifact_version": gl_lab::ARTIFACT_VERSION,
        "command": cfg.command.name(),
        "format": inv.format.name(),
        "seed": cfg.seed,
        "config": cfg.echo(),
        "summary": output.summary,
    });
    format::emit(&output.table, inv.format, inv.out.as_deref(), &meta)
}
