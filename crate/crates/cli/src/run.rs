//! Run directory bookkeeping: output claims, manifests and error classes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad inputs, flags or configuration: exit status 1.
    Validation(String),
    /// Failures while computing or writing: exit status 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ability_vi::Error> for CliError {
    fn from(e: ability_vi::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_error(what: &str, path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Runtime(format!("{what} {}: {e}", path.display()))
}

/// Flags as given on the command line, recorded in every manifest.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Flags {
    pub block: Option<usize>,
    pub model: Option<String>,
    pub event_pair: Option<[String; 2]>,
    pub top_n: Option<usize>,
    pub force: bool,
}

pub struct Context {
    pub stage: &'static str,
    pub config: RunConfig,
    pub config_path: Option<PathBuf>,
    config_bytes: Vec<u8>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub flags: Flags,
    pub threads: Option<usize>,
    started: Instant,
    outputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    stage: &'a str,
    flags: &'a Flags,
    seed: Option<u64>,
    config_path: Option<String>,
    /// SHA-256 of the configuration file's bytes, empty input without one.
    config_sha256: String,
    /// The configuration after flag overrides, enough to re-run the stage.
    config: &'a RunConfig,
    versions: Versions,
    threads: Option<usize>,
    outputs: Vec<String>,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct Versions {
    ability_vi: &'static str,
    ability_vi_cli: &'static str,
}

impl Context {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        stage: &'static str,
        config: RunConfig,
        config_path: Option<PathBuf>,
        config_bytes: Vec<u8>,
        out: PathBuf,
        seed: Option<u64>,
        flags: Flags,
        threads: Option<usize>,
    ) -> Self {
        Context {
            stage,
            config,
            config_path,
            config_bytes,
            out,
            seed,
            flags,
            threads,
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| {
            CliError::Validation(format!(
                "{} is stochastic and needs a seed: pass --seed or set [cli] seed",
                self.stage
            ))
        })
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out.join(stage)
    }

    /// Registers an output of this stage, refusing to overwrite an existing
    /// file unless `--force` was given.
    pub fn claim(&mut self, name: &str) -> CliResult<PathBuf> {
        let dir = self.stage_dir(self.stage);
        let path = dir.join(name);
        if path.exists() && !self.flags.force {
            return Err(CliError::Validation(format!(
                "{} already exists; pass --force to overwrite",
                path.display()
            )));
        }
        std::fs::create_dir_all(&dir).map_err(|e| io_error("cannot create", &dir, e))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Writes the manifest next to the stage outputs. `tag` distinguishes
    /// several runs of one stage in the same run directory.
    pub fn finish(mut self, tag: &str) -> CliResult<()> {
        let name = if tag.is_empty() {
            "manifest.json".to_string()
        } else {
            format!("manifest.{tag}.json")
        };
        let path = self.claim(&name)?;
        let manifest = Manifest {
            stage: self.stage,
            flags: &self.flags,
            seed: self.seed,
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            config_sha256: format!("{:x}", Sha256::digest(&self.config_bytes)),
            config: &self.config,
            versions: Versions {
                ability_vi: ability_vi::VERSION,
                ability_vi_cli: env!("CARGO_PKG_VERSION"),
            },
            threads: self.threads,
            outputs: self
                .outputs
                .iter()
                .filter(|p| **p != path)
                .map(|p| p.display().to_string())
                .collect(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Runtime(format!("serializing manifest: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_error("cannot write", &path, e))
    }
}

/// Reads `ABILITY_VI_THREADS`, which must be a positive integer when set.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var("ABILITY_VI_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Validation(format!(
                "ABILITY_VI_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}
