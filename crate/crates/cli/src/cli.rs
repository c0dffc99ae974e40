use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "irony", version, about = "Irony and sarcasm detection with a character-level contextual encoder")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Flat key=value configuration file.
    #[arg(long, global = true, env = "IRONY_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable. Command flags win over these.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Where to write the run manifest. Defaults to a path next to the
    /// output, or `irony-<command>.manifest.json` for commands that only
    /// print.
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Tokenize one document per line; prints one JSON array of tokens per line.
    Tokenize {
        /// Input text file (standard input when omitted).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Keep artifact hashtags such as #sarcasm.
        #[arg(long)]
        keep_artifacts: bool,
    },
    /// Load a labelled corpus and write it as dataset JSON.
    Ingest {
        #[arg(long)]
        data: Option<PathBuf>,
        /// tsv or jsonl.
        #[arg(long)]
        format: Option<String>,
        /// twitter, reddit, dialog or external.
        #[arg(long)]
        source: Option<String>,
        /// Also apply the length filter with this truncation limit.
        #[arg(long)]
        truncate: Option<usize>,
        /// Also apply the length filter with this minimum length.
        #[arg(long)]
        min_tokens: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncate long examples and drop short ones.
    Filter {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        truncate: Option<usize>,
        #[arg(long)]
        min_tokens: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extend the training split with hashtag-overlapping pool tweets.
    Augment {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        truncate: Option<usize>,
        #[arg(long)]
        min_tokens: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretrain the character-level biLM encoder on a text corpus.
    #[command(name = "pretrain-lm")]
    PretrainLm {
        /// One sentence per line.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier (or an ensemble) on top of a frozen encoder.
    Train {
        /// Dataset JSON, or a raw corpus read with `data.format`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Encoder checkpoint from `pretrain-lm`.
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of ensemble members; 1 trains a single model.
        #[arg(long)]
        ensemble: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model or ensemble; prints a JSON report.
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Split of `--data` to score.
        #[arg(long, default_value = "test")]
        split: String,
        /// Paired-statement fixture (JSONL) scored by paired accuracy.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Directory of member checkpoints to combine by majority vote.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label raw texts; prints JSONL {id, label, p_sarcastic}.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        /// One text per line, or JSON objects with `id` and `text`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a recorded manifest and compare outputs and metrics.
    Replay {
        /// Manifest written by an earlier run.
        manifest_file: PathBuf,
        /// Directory for the replayed outputs (a fresh temporary directory
        /// when omitted).
        #[arg(long)]
        scratch: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tokenize { .. } => "tokenize",
            Command::Ingest { .. } => "ingest",
            Command::Filter { .. } => "filter",
            Command::Augment { .. } => "augment",
            Command::PretrainLm { .. } => "pretrain-lm",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Predict { .. } => "predict",
            Command::Replay { .. } => "replay",
        }
    }

    /// Flag values that map onto configuration keys.
    pub fn config_overrides(&self) -> Vec<(String, String)> {
        let mut o: Vec<(&str, Option<String>)> = Vec::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        match self {
            Command::Tokenize { keep_artifacts, .. } => {
                if *keep_artifacts {
                    o.push(("tokenizer.strip_artifact_hashtags", Some("false".into())));
                }
            }
            Command::Ingest { data, format, source, truncate, min_tokens, .. } => {
                o.push(("paths.data", path(data)));
                o.push(("data.format", format.clone()));
                o.push(("data.source", source.clone()));
                o.push(("data.truncate", truncate.map(|v| v.to_string())));
                o.push(("data.min_tokens", min_tokens.map(|v| v.to_string())));
            }
            Command::Filter { data, format, truncate, min_tokens, .. } => {
                o.push(("paths.data", path(data)));
                o.push(("data.format", format.clone()));
                o.push(("data.truncate", truncate.map(|v| v.to_string())));
                o.push(("data.min_tokens", min_tokens.map(|v| v.to_string())));
            }
            Command::Augment { data, pool, format, truncate, min_tokens, seed, .. } => {
                o.push(("paths.data", path(data)));
                o.push(("paths.pool", path(pool)));
                o.push(("data.format", format.clone()));
                o.push(("data.truncate", truncate.map(|v| v.to_string())));
                o.push(("data.min_tokens", min_tokens.map(|v| v.to_string())));
                o.push(("seed", seed.map(|v| v.to_string())));
            }
            Command::PretrainLm { corpus, epochs, lr, seed, .. } => {
                o.push(("paths.corpus", path(corpus)));
                o.push(("pretrain.epochs", epochs.map(|v| v.to_string())));
                o.push(("pretrain.lr", lr.map(|v| v.to_string())));
                o.push(("seed", seed.map(|v| v.to_string())));
            }
            Command::Train { data, encoder, seed, ensemble, .. } => {
                o.push(("paths.data", path(data)));
                o.push(("paths.encoder", path(encoder)));
                o.push(("seed", seed.map(|v| v.to_string())));
                o.push(("ensemble.size", ensemble.map(|v| v.to_string())));
            }
            Command::Evaluate { model, data, pairs, .. } => {
                o.push(("paths.model", path(model)));
                o.push(("paths.data", path(data)));
                o.push(("paths.pairs", path(pairs)));
            }
            Command::Predict { model, .. } => o.push(("paths.model", path(model))),
            Command::Replay { .. } => {}
        }
        if let Some(out) = self.out() {
            o.push(("paths.out", Some(out.display().to_string())));
        }
        o.into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    }

    pub fn out(&self) -> Option<&Path> {
        match self {
            Command::Ingest { out, .. }
            | Command::Filter { out, .. }
            | Command::Augment { out, .. }
            | Command::PretrainLm { out, .. }
            | Command::Train { out, .. }
            | Command::Evaluate { out, .. }
            | Command::Predict { out, .. } => out.as_deref(),
            Command::Tokenize { .. } | Command::Replay { .. } => None,
        }
    }

    /// Points the output at `dir`, keeping the original file name. Used to
    /// replay a run without touching its recorded outputs.
    pub fn redirect_out(&mut self, dir: &Path) {
        let is_dir = matches!(self, Command::Train { .. });
        match self {
            Command::Ingest { out, .. }
            | Command::Filter { out, .. }
            | Command::Augment { out, .. }
            | Command::PretrainLm { out, .. }
            | Command::Train { out, .. }
            | Command::Evaluate { out, .. }
            | Command::Predict { out, .. } => {
                if let Some(o) = out.as_mut() {
                    *o = if is_dir {
                        dir.join("out")
                    } else {
                        dir.join(o.file_name().unwrap_or_else(|| "out".as_ref()))
                    };
                }
            }
            Command::Tokenize { .. } | Command::Replay { .. } => {}
        }
    }
}
