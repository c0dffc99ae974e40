//! Flat `key = value` run configuration covering every tunable of the
//! pipeline.
//!
//! ```text
//! # comments start with '#'
//! preset = desk            # or "full"; applied before every other key
//! seed = 7
//! encoder.filters = 1:8, 2:8, 3:16
//! train.clip_norm = none
//! ```
//!
//! Keys are grouped by prefix (`tokenizer.`, `encoder.`, `classifier.`,
//! `train.`, `pretrain.`, `data.`, `augment.`, `ensemble.`, `paths.`).
//! Unknown keys and repeated keys are errors. [`RunConfig::render`] writes
//! every key, defaults included, so a rendered config replays exactly.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierConfig;
use crate::corpus::{Format, Source};
use crate::encoder::{EncoderConfig, MixMode, PretrainOptions};
use crate::text::TokenizerConfig;
use crate::train::TrainConfig;
use crate::{Error, Result};

/// Environment variable naming a config file to use when none is given.
pub const CONFIG_ENV_VAR: &str = "IRONY_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Desk,
    Full,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => Err(Error::Config(format!("unknown preset {s:?} (expected desk or full)"))),
        }
    }
}

impl Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataOptions {
    pub format: Format,
    pub source: Source,
    pub truncate: usize,
    pub min_tokens: usize,
}

impl Default for DataOptions {
    fn default() -> Self {
        DataOptions {
            format: Format::TsvLabelText,
            source: Source::Twitter,
            truncate: 40,
            min_tokens: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub encoder: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub tokenizer: TokenizerConfig,
    pub encoder: EncoderConfig,
    pub classifier: ClassifierConfig,
    pub train: TrainConfig,
    pub pretrain: PretrainOptions,
    pub data: DataOptions,
    pub language_threshold: f64,
    /// Members trained by one `train` run. 1 trains a single model; the
    /// usual comparison setting is [`crate::train::DEFAULT_ENSEMBLE_SIZE`].
    pub ensemble_size: usize,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Desk)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key} = {value:?}: expected true or false"))),
    }
}

fn parse_opt_f64(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn parse_filters(key: &str, value: &str) -> Result<Vec<(usize, usize)>> {
    value
        .split(',')
        .map(|g| {
            let (w, n) = g
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: filter group {g:?} is not width:count")))?;
            Ok((parse(key, w.trim())?, parse(key, n.trim())?))
        })
        .collect()
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::TsvLabelText => "tsv",
        Format::Jsonl => "jsonl",
    }
}

fn source_name(s: Source) -> &'static str {
    match s {
        Source::Twitter => "twitter",
        Source::Reddit => "reddit",
        Source::Dialog => "dialog",
        Source::External => "external",
    }
}

fn mix_name(m: MixMode) -> &'static str {
    match m {
        MixMode::TopLayer => "top_layer",
        MixMode::LearnedScalarMix => "learned_scalar_mix",
    }
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (encoder, classifier) = match preset {
            Preset::Desk => (EncoderConfig::default(), ClassifierConfig::default()),
            Preset::Full => (EncoderConfig::full_scale(), ClassifierConfig::full_scale()),
        };
        RunConfig {
            preset,
            seed: 0,
            tokenizer: TokenizerConfig::stripping(),
            encoder,
            classifier,
            train: TrainConfig::default(),
            pretrain: PretrainOptions::default(),
            data: DataOptions::default(),
            language_threshold: 0.5,
            ensemble_size: 1,
            paths: Paths::default(),
        }
    }

    /// Sets one key. `preset` is only accepted through [`RunConfig::parse_str`]
    /// and [`RunConfig::apply`], which apply it before anything else.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => {
                self.seed = parse(key, v)?;
                self.train.seed = self.seed;
                self.pretrain.seed = self.seed;
            }
            "tokenizer.strip_artifact_hashtags" => self.tokenizer.strip_artifact_hashtags = parse_bool(key, v)?,
            "tokenizer.artifact_hashtags" => {
                let tags: Vec<&str> = v.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
                self.tokenizer = self.tokenizer.clone().with_artifacts(tags)?;
            }
            "tokenizer.max_token_chars" => self.tokenizer.max_token_chars = parse(key, v)?,
            "encoder.d_char" => self.encoder.d_char = parse(key, v)?,
            "encoder.filters" => self.encoder.filters = parse_filters(key, v)?,
            "encoder.d_word" => self.encoder.d_word = parse(key, v)?,
            "encoder.n_layers" => self.encoder.n_layers = parse(key, v)?,
            "encoder.d_lm" => self.encoder.d_lm = parse(key, v)?,
            "encoder.mix_mode" => self.encoder.mix_mode = parse(key, v)?,
            "encoder.highway" => self.encoder.highway = parse_bool(key, v)?,
            "encoder.dropout" => self.encoder.dropout = parse(key, v)?,
            "encoder.max_word_chars" => self.encoder.max_word_chars = parse(key, v)?,
            "encoder.lm_vocab_cap" => self.encoder.lm_vocab_cap = parse(key, v)?,
            "classifier.lstm_hidden" => self.classifier.lstm_hidden = parse(key, v)?,
            "classifier.ffn_units" => self.classifier.ffn_units = parse(key, v)?,
            "classifier.dropout" => self.classifier.dropout = parse(key, v)?,
            "classifier.batch_size" => self.classifier.batch_size = parse(key, v)?,
            "classifier.allow_nonstandard" => self.classifier.allow_nonstandard = parse_bool(key, v)?,
            "train.lr0" => self.train.lr0 = parse(key, v)?,
            "train.decay_factor" => self.train.decay_factor = parse(key, v)?,
            "train.plateau_patience" => self.train.plateau_patience = parse(key, v)?,
            "train.max_epochs" => self.train.max_epochs = parse(key, v)?,
            "train.early_stop_patience" => self.train.early_stop_patience = parse(key, v)?,
            "train.min_lr" => self.train.min_lr = parse(key, v)?,
            "train.clip_norm" => self.train.clip_norm = parse_opt_f64(key, v)?,
            "pretrain.epochs" => self.pretrain.epochs = parse(key, v)?,
            "pretrain.lr" => self.pretrain.learning_rate = parse(key, v)?,
            "pretrain.batch_size" => self.pretrain.batch_size = parse(key, v)?,
            "pretrain.heldout_fraction" => self.pretrain.heldout_fraction = parse(key, v)?,
            "pretrain.clip_norm" => self.pretrain.clip_norm = parse_opt_f64(key, v)?,
            "data.format" => self.data.format = parse(key, v)?,
            "data.source" => self.data.source = parse(key, v)?,
            "data.truncate" => self.data.truncate = parse(key, v)?,
            "data.min_tokens" => self.data.min_tokens = parse(key, v)?,
            "augment.language_threshold" => self.language_threshold = parse(key, v)?,
            "ensemble.size" => self.ensemble_size = parse(key, v)?,
            "paths.data" => self.paths.data = parse_path(v),
            "paths.pool" => self.paths.pool = parse_path(v),
            "paths.pairs" => self.paths.pairs = parse_path(v),
            "paths.corpus" => self.paths.corpus = parse_path(v),
            "paths.encoder" => self.paths.encoder = parse_path(v),
            "paths.model" => self.paths.model = parse_path(v),
            "paths.out" => self.paths.out = parse_path(v),
            "preset" => {
                return Err(Error::Config("preset must be applied before other keys".into()));
            }
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Starts from the requested preset (desk when absent) and applies the
    /// remaining pairs in order. A key may appear at most once.
    pub fn apply(base: Option<&RunConfig>, pairs: &[(String, String)]) -> Result<RunConfig> {
        let mut seen = std::collections::HashSet::new();
        for (k, _) in pairs {
            if !seen.insert(k.as_str()) {
                return Err(Error::Config(format!("key {k:?} given more than once")));
            }
        }
        let preset = pairs.iter().find(|(k, _)| k == "preset");
        let mut cfg = match (preset, base) {
            (Some((_, v)), _) => RunConfig::preset(v.trim().parse()?),
            (None, Some(b)) => b.clone(),
            (None, None) => RunConfig::default(),
        };
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<RunConfig> {
        RunConfig::apply(None, &parse_pairs(text)?)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse_str(&text)
    }

    /// Applies `key=value` overrides on top of `self`. A `preset` override
    /// resets everything to that preset first.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<RunConfig> {
        RunConfig::apply(Some(self), overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.tokenizer.validate()?;
        self.encoder.validate()?;
        self.classifier.validate()?;
        self.train.validate()?;
        if self.data.min_tokens == 0 || self.data.truncate < self.data.min_tokens {
            return Err(Error::Config("need 1 ≤ data.min_tokens ≤ data.truncate".into()));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble.size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.language_threshold) {
            return Err(Error::Config("augment.language_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Every key with its effective value, in a fixed order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let e = &self.encoder;
        let c = &self.classifier;
        let t = &self.train;
        let p = &self.pretrain;
        let filters = e
            .filters
            .iter()
            .map(|(w, n)| format!("{w}:{n}"))
            .collect::<Vec<_>>()
            .join(",");
        let tags = self.tokenizer.artifact_hashtags.iter().cloned().collect::<Vec<_>>().join(",");
        let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), |v| v.to_string());
        [
            ("preset", self.preset.to_string()),
            ("seed", self.seed.to_string()),
            ("tokenizer.strip_artifact_hashtags", self.tokenizer.strip_artifact_hashtags.to_string()),
            ("tokenizer.artifact_hashtags", tags),
            ("tokenizer.max_token_chars", self.tokenizer.max_token_chars.to_string()),
            ("encoder.d_char", e.d_char.to_string()),
            ("encoder.filters", filters),
            ("encoder.d_word", e.d_word.to_string()),
            ("encoder.n_layers", e.n_layers.to_string()),
            ("encoder.d_lm", e.d_lm.to_string()),
            ("encoder.mix_mode", mix_name(e.mix_mode).to_string()),
            ("encoder.highway", e.highway.to_string()),
            ("encoder.dropout", e.dropout.to_string()),
            ("encoder.max_word_chars", e.max_word_chars.to_string()),
            ("encoder.lm_vocab_cap", e.lm_vocab_cap.to_string()),
            ("classifier.lstm_hidden", c.lstm_hidden.to_string()),
            ("classifier.ffn_units", c.ffn_units.to_string()),
            ("classifier.dropout", c.dropout.to_string()),
            ("classifier.batch_size", c.batch_size.to_string()),
            ("classifier.allow_nonstandard", c.allow_nonstandard.to_string()),
            ("train.lr0", t.lr0.to_string()),
            ("train.decay_factor", t.decay_factor.to_string()),
            ("train.plateau_patience", t.plateau_patience.to_string()),
            ("train.max_epochs", t.max_epochs.to_string()),
            ("train.early_stop_patience", t.early_stop_patience.to_string()),
            ("train.min_lr", t.min_lr.to_string()),
            ("train.clip_norm", opt(t.clip_norm)),
            ("pretrain.epochs", p.epochs.to_string()),
            ("pretrain.lr", p.learning_rate.to_string()),
            ("pretrain.batch_size", p.batch_size.to_string()),
            ("pretrain.heldout_fraction", p.heldout_fraction.to_string()),
            ("pretrain.clip_norm", opt(p.clip_norm)),
            ("data.format", format_name(self.data.format).to_string()),
            ("data.source", source_name(self.data.source).to_string()),
            ("data.truncate", self.data.truncate.to_string()),
            ("data.min_tokens", self.data.min_tokens.to_string()),
            ("augment.language_threshold", self.language_threshold.to_string()),
            ("ensemble.size", self.ensemble_size.to_string()),
            ("paths.data", opt_path(&self.paths.data)),
            ("paths.pool", opt_path(&self.paths.pool)),
            ("paths.pairs", opt_path(&self.paths.pairs)),
            ("paths.corpus", opt_path(&self.paths.corpus)),
            ("paths.encoder", opt_path(&self.paths.encoder)),
            ("paths.model", opt_path(&self.paths.model)),
            ("paths.out", opt_path(&self.paths.out)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn render(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Splits `key = value` lines, dropping blank lines and `#` comments. A `#`
/// only starts a comment at the beginning of a line or after whitespace, so
/// hashtag lists survive.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedRecord {
            line: i + 1,
            reason: format!("expected key = value, got {line:?}"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            // `# ` or a lone `#` starts a comment; `#tag` is a value
            let next = bytes.get(i + 1);
            if next.is_none_or(|n| n.is_ascii_whitespace()) {
                return &line[..i];
            }
        }
    }
    line
}

/// Parses a single `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("seed", "9").unwrap();
        cfg.train.clip_norm = None;
        cfg.encoder.mix_mode = MixMode::LearnedScalarMix;
        cfg.paths.data = Some("data/semeval".into());
        let back = RunConfig::parse_str(&cfg.render()).unwrap();
        assert_eq!(back, cfg);
        let full = RunConfig::preset(Preset::Full);
        assert_eq!(RunConfig::parse_str(&full.render()).unwrap(), full);
    }

    #[test]
    fn unknown_and_repeated_keys_fail() {
        assert!(RunConfig::parse_str("train.lr = 0.1").is_err());
        assert!(RunConfig::parse_str("seed = 1\nseed = 2").is_err());
        assert!(RunConfig::parse_str("just words").is_err());
        assert!(RunConfig::parse_str("train.decay_factor = half").is_err());
    }

    #[test]
    fn comments_presets_and_overrides() {
        let text = "# run\nseed = 3  # trailing\ntokenizer.artifact_hashtags = #sarcasm, #not\npreset = full\n";
        let cfg = RunConfig::parse_str(text).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.train.seed, 3);
        assert_eq!(cfg.encoder.d_lm, 512);
        assert_eq!(cfg.tokenizer.artifact_hashtags.len(), 2);
        let o = cfg.with_overrides(&[parse_override("seed=4").unwrap()]).unwrap();
        assert_eq!((o.seed, o.encoder.d_lm), (4, 512));
        let reset = cfg.with_overrides(&[("preset".into(), "desk".into())]).unwrap();
        assert_eq!(reset.encoder.d_lm, 64);
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig::default().tokenizer.strip_artifact_hashtags);
    }
}
