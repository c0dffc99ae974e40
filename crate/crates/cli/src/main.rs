//! `irony`: one binary wiring tokenization, corpus preparation, encoder
//! pretraining, classifier training, evaluation and prediction.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure (non-finite loss or gradient, or a replay whose
//! outputs diverge from the recorded run).

mod cli;
mod manifest;
mod run;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use irony_core::config::{parse_override, RunConfig};
use irony_core::ErrorClass;
use thiserror::Error;

use cli::{Cli, Command, GlobalArgs};
use manifest::{content_hash, InputRecord, Manifest, MANIFEST_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String, &'static str),

    #[error(transparent)]
    Core(#[from] irony_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input {role} at {path} no longer matches the recorded hash")]
    InputChanged { role: String, path: PathBuf },

    #[error("replay diverged from the recorded run:\n  {}", .0.join("\n  "))]
    ReplayMismatch(Vec<String>),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(..) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            },
            CliError::Io { .. } | CliError::InputChanged { .. } => 2,
            CliError::ReplayMismatch(_) => 3,
        }
    }
}

/// Config file (or `IRONY_CONFIG`), then `--set` overrides, then command
/// flags.
fn resolve_config(global: &GlobalArgs, cmd: &Command) -> Result<RunConfig, CliError> {
    let base = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let sets = global
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = base.with_overrides(&sets)?.with_overrides(&cmd.config_overrides())?;
    cfg.validate()?;
    Ok(cfg)
}

fn default_manifest_path(cmd: &Command) -> PathBuf {
    match (cmd, cmd.out()) {
        (Command::Train { .. }, Some(dir)) => dir.join("manifest.json"),
        (_, Some(out)) => {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            out.with_file_name(name)
        }
        (_, None) => PathBuf::from(format!("irony-{}.manifest.json", cmd.name())),
    }
}

/// Runs `cmd` and builds its manifest. Inputs are hashed before the run.
fn run_recorded(cmd: &Command, cfg: &RunConfig) -> Result<(Manifest, String), CliError> {
    log::info!("running {} with configuration:", cmd.name());
    for (k, v) in cfg.pairs() {
        log::info!("  {k} = {v}");
    }
    let pre_hashes = input_candidates(cmd, cfg)
        .into_iter()
        .filter(|p| p.exists())
        .map(|p| content_hash(&p).map(|h| (p, h)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let out = run::execute(cmd, cfg)?;
    let mut inputs = Vec::new();
    for (role, path) in out.inputs {
        let hash = match pre_hashes.get(&path) {
            Some(h) => h.clone(),
            None => content_hash(&path)?,
        };
        inputs.push(InputRecord { role, path, hash });
    }
    let mut outputs = BTreeMap::new();
    if !out.stdout.is_empty() {
        outputs.insert("<stdout>".to_string(), manifest::blob_hash(out.stdout.as_bytes()));
    }
    for (name, path) in out.outputs {
        outputs.insert(name, content_hash(&path)?);
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: cmd.clone(),
        seed: cfg.seed,
        config: cfg.pairs(),
        inputs,
        outputs,
        metrics: out.metrics,
    };
    Ok((manifest, out.stdout))
}

/// Paths a command may read, so they can be hashed before it runs.
fn input_candidates(cmd: &Command, cfg: &RunConfig) -> Vec<PathBuf> {
    let p = &cfg.paths;
    let mut v: Vec<PathBuf> = [&p.data, &p.pool, &p.pairs, &p.corpus, &p.encoder, &p.model]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    if let Command::Tokenize { input: Some(i), .. } | Command::Predict { input: Some(i), .. } = cmd {
        v.push(i.clone());
    }
    v
}

fn replay(manifest_file: &Path, scratch: Option<&Path>) -> Result<String, CliError> {
    let recorded = Manifest::read(manifest_file)?;
    if matches!(recorded.command, Command::Replay { .. }) {
        return Err(CliError::Usage("cannot replay a replay".into(), "replay"));
    }
    if matches!(recorded.command, Command::Tokenize { input: None, .. }) {
        return Err(CliError::Usage(
            "the recorded run read standard input, which cannot be replayed".into(),
            "replay",
        ));
    }
    for input in &recorded.inputs {
        if content_hash(&input.path)? != input.hash {
            return Err(CliError::InputChanged {
                role: input.role.clone(),
                path: input.path.clone(),
            });
        }
    }
    let dir = match scratch {
        Some(d) => d.to_path_buf(),
        None => std::env::temp_dir().join(format!("irony-replay-{}", std::process::id())),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut cmd = recorded.command.clone();
    cmd.redirect_out(&dir);
    let base = RunConfig::apply(None, &recorded.config)?;
    let cfg = base.with_overrides(&cmd.config_overrides())?;
    let (replayed, _) = run_recorded(&cmd, &cfg)?;
    replayed.write(&dir.join("replay.manifest.json"))?;
    let diffs = recorded.differences(&replayed);
    if !diffs.is_empty() {
        return Err(CliError::ReplayMismatch(diffs));
    }
    Ok(serde_json::json!({
        "replayed": recorded.command.name(),
        "identical": true,
        "outputs": replayed.outputs.len(),
        "scratch": dir,
    })
    .to_string()
        + "\n")
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let stdout = match &cli.command {
        Command::Replay { manifest_file, scratch } => replay(manifest_file, scratch.as_deref())?,
        cmd => {
            let cfg = resolve_config(&cli.global, cmd)?;
            let (manifest, stdout) = run_recorded(cmd, &cfg)?;
            let path = cli.global.manifest.clone().unwrap_or_else(|| default_manifest_path(cmd));
            manifest.write(&path)?;
            log::info!("manifest written to {}", path.display());
            stdout
        }
    };
    let mut lock = std::io::stdout().lock();
    lock.write_all(stdout.as_bytes())
        .and_then(|_| lock.flush())
        .map_err(|e| CliError::io("<stdout>", e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_, name) = &e {
                let mut root = Cli::command();
                root.build();
                if let Some(sub) = root.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
