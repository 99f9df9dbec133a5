//! Batch driver for `sps-core`: configuration, dispatch and artifacts.
//!
//! A run writes its files into the configured output directory and finishes
//! with `manifest.json`, which echoes the configuration and lists every file
//! with its SHA-256.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver did not converge,
//! 3 runtime or IO failure, 4 a check command found a violation.

pub mod commands;
pub mod config;
pub mod export;

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sps_core::SpsError;

pub use commands::{Command, Verdict};
pub use config::{ConfigError, Overrides, RunConfig};
use export::{write_atomic, ArtifactDir, FileRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const THREADS_ENV: &str = "SPS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sps", version, about = "Nehari-manifold ground states of the Schrodinger-Poisson-Slater system")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML run configuration; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bump radius for `multiplicity` and `sweep-p`.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub n_centers: Option<usize>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            p: self.p,
            lambda: self.lambda,
            resolution: self.resolution,
            seed: self.seed,
            out: self.out.clone(),
            r: self.r,
            n_centers: self.n_centers,
        }
    }

    /// File values with flags applied, not yet validated.
    pub fn resolve_config(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NotConverged,
    CheckFailed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub threads: usize,
    pub config: RunConfig,
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<ErrorInfo>,
    pub summary: Value,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub manifest: Option<RunManifest>,
    pub manifest_path: Option<PathBuf>,
    pub lines: Vec<String>,
}

fn thread_count() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError {
                path: THREADS_ENV.to_owned(),
                message: format!("must be a positive integer, got {v:?}"),
            }),
        },
    }
}

fn core_error_code(e: &SpsError) -> i32 {
    match e {
        SpsError::NotConverged { .. } => EXIT_NOT_CONVERGED,
        SpsError::InvalidDomain(_)
        | SpsError::InvalidResolution(_)
        | SpsError::InvalidParams(_)
        | SpsError::EmptyInterior
        | SpsError::RadiusTooLarge { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

struct Failure {
    exit_code: i32,
    info: ErrorInfo,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            exit_code: EXIT_CONFIG,
            info: ErrorInfo {
                code: "config_error".into(),
                message: e.to_string(),
            },
        }
    }
}

fn io_failure(e: &std::io::Error) -> Failure {
    Failure {
        exit_code: EXIT_RUNTIME,
        info: ErrorInfo {
            code: "io_error".into(),
            message: e.to_string(),
        },
    }
}

/// Validates `cfg`, runs `command` on a pool capped by `SPS_THREADS`, and
/// writes the manifest. Never panics on bad input; the exit code says what
/// happened.
pub fn run(command: Command, cfg: &RunConfig) -> Outcome {
    let mut lines = Vec::new();
    let mut threads = 0;
    let mut dir: Option<ArtifactDir> = None;

    let result: Result<commands::Report, Failure> = (|| {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(thread_count()?.unwrap_or(0))
            .build()
            .map_err(|e| Failure {
                exit_code: EXIT_RUNTIME,
                info: ErrorInfo {
                    code: "thread_pool".into(),
                    message: e.to_string(),
                },
            })?;
        threads = pool.current_num_threads();
        let d = dir.insert(ArtifactDir::create(&cfg.out).map_err(|e| io_failure(&e))?);
        let report = pool.install(|| commands::dispatch(command, cfg, d)).map_err(|e| match e {
            commands::CommandError::Io(e) => io_failure(&e),
            commands::CommandError::Core(e) => Failure {
                exit_code: core_error_code(&e),
                info: ErrorInfo {
                    code: e.code().into(),
                    message: e.to_string(),
                },
            },
        })?;
        Ok(report)
    })();

    let (status, exit_code, error, summary) = match result {
        Ok(report) => {
            lines = report.lines;
            let (status, code) = match report.verdict {
                Verdict::Ok => (Status::Ok, EXIT_OK),
                Verdict::NotConverged => (Status::NotConverged, EXIT_NOT_CONVERGED),
                Verdict::CheckFailed => (Status::CheckFailed, EXIT_CHECK_FAILED),
            };
            let error = (status == Status::NotConverged).then(|| ErrorInfo {
                code: "not_converged".into(),
                message: "at least one minimization stopped before reaching its tolerance".into(),
            });
            (status, code, error, report.summary)
        }
        Err(f) => {
            if let Some(d) = dir.as_mut() {
                d.discard();
            }
            lines.push(format!("error [{}]: {}", f.info.code, f.info.message));
            (Status::Error, f.exit_code, Some(f.info), Value::Null)
        }
    };

    let manifest = RunManifest {
        tool: "sps".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        threads,
        config: cfg.clone(),
        status,
        exit_code,
        error,
        summary,
        files: dir.as_ref().map(|d| d.files().to_vec()).unwrap_or_default(),
    };

    // A config error may leave no usable directory; the manifest is then skipped.
    let root = dir.as_ref().map(|d| d.root().to_path_buf()).or_else(|| {
        (!cfg.out.as_os_str().is_empty() && std::fs::create_dir_all(&cfg.out).is_ok()).then(|| cfg.out.clone())
    });
    let mut manifest_path = None;
    let mut exit_code = exit_code;
    if let Some(root) = root {
        let path = root.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        match write_atomic(&path, text.as_bytes()) {
            Ok(()) => manifest_path = Some(path),
            Err(e) => {
                if let Some(d) = dir.as_mut() {
                    d.discard();
                }
                lines.push(format!("error [io_error]: cannot write manifest: {e}"));
                exit_code = EXIT_RUNTIME;
            }
        }
    }
    Outcome {
        exit_code,
        manifest: Some(manifest),
        manifest_path,
        lines,
    }
}

/// Entry point shared by the binary: parse, resolve, run, print.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match cli.resolve_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if cli.print_config {
        if let Err(e) = cfg.validate() {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
        print!("{}", cfg.to_toml());
        return EXIT_OK;
    }
    let outcome = run(cli.command, &cfg);
    for line in &outcome.lines {
        if line.starts_with("error [") {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
    if let Some(path) = &outcome.manifest_path {
        println!("manifest: {}", path.display());
    }
    outcome.exit_code
}
