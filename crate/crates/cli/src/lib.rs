//! Batch front end: each subcommand reads a flat config, runs one or more
//! core operations and writes CSV/JSON files plus a `manifest.json` that
//! echoes every effective setting and hashes every output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod output;
pub mod settings;

use cmnoise_core::{Config, DerivedScales};

pub use args::{Cli, Command, Sweep};
pub use output::{verify_manifest, FileRecord, OutputDir, RunManifest};
pub use settings::Settings;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] cmnoise_core::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cmnoise_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(
                E::Config { .. }
                | E::MissingKey(_)
                | E::InvalidParameter { .. }
                | E::InvalidKernel(_)
                | E::KernelNotIntegrable(_)
                | E::InvalidGrid(_)
                | E::InvalidMatrix(_)
                | E::Unsupported(_),
            ) => EXIT_USAGE,
            CliError::Core(_) | CliError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

/// What a subcommand hands back for printing.
#[derive(Debug, Clone)]
pub struct Report {
    pub summary: serde_json::Value,
    pub text: String,
    /// `Some` for commands that judge against acceptance thresholds.
    pub verdict: Option<bool>,
}

/// Per-run state shared by the subcommands.
#[derive(Debug)]
pub struct Ctx {
    pub settings: Settings,
    pub out: OutputDir,
    pub scales: Option<DerivedScales>,
    seed_override: Option<u64>,
    seed: Option<u64>,
    command: &'static str,
}

impl Ctx {
    pub fn seed(&mut self) -> cmnoise_core::Result<u64> {
        let s = match self.seed_override {
            Some(s) => {
                self.settings.record("seed", s);
                s
            }
            None => self.settings.get_or("seed", 1u64)?,
        };
        self.seed = Some(s);
        Ok(s)
    }

    /// Fix the CSV header once all settings have been read.
    pub fn freeze(&mut self) {
        let hash = self.settings.hash();
        self.out.set_header(self.command, &hash);
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub manifest: RunManifest,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.report.verdict {
            Some(false) => EXIT_ACCEPTANCE,
            _ => EXIT_OK,
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim());
    }
    Ok(cfg)
}

/// Run one subcommand. The manifest is written even when the command fails,
/// listing whatever files were produced before the failure.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let started = output::now_ms();
    let cfg = load_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build().map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    let mut ctx = Ctx {
        settings: Settings::new(cfg),
        out: OutputDir::create(&cli.out)?,
        scales: None,
        seed_override: cli.seed,
        seed: None,
        command: cli.command.name(),
    };
    let result = pool.install(|| commands::dispatch(&cli.command, &mut ctx));
    let (status, error, summary) = match &result {
        Ok(r) if r.verdict == Some(false) => ("fail", None, r.summary.clone()),
        Ok(r) => ("ok", None, r.summary.clone()),
        Err(e) => ("error", Some(e.to_string()), serde_json::Value::Null),
    };
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        parameters: ctx.settings.echo().clone(),
        config_sha256: ctx.settings.hash(),
        derived_scales: ctx.scales,
        seed: ctx.seed,
        threads: pool.current_num_threads(),
        started_unix_ms: started,
        finished_unix_ms: output::now_ms(),
        status: status.to_string(),
        error,
        files: ctx.out.files().to_vec(),
        summary,
    };
    ctx.out.write_manifest(&manifest)?;
    let report = result?;
    Ok(Outcome { report, manifest })
}
