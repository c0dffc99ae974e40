use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use irony_core::classifier::ClassifierModel;
use irony_core::config::RunConfig;
use irony_core::corpus::{self, Dataset, Example, Label, SarcPair, Split};
use irony_core::encoder::{self, pretrain_lm, EncoderModel, PretrainOptions};
use irony_core::eval::{self, MetricsReport, PairedResult, SarcasmScorer};
use irony_core::reference::NON_REPRODUCIBILITY;
use irony_core::text::{tokenize, LatinScriptHeuristic};
use irony_core::train::{self, ensemble_seeds, TrainState};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::Command;
use crate::CliError;

/// What a command produced, before hashing.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub stdout: String,
    pub inputs: Vec<(String, PathBuf)>,
    /// `(name, path)`; names are what the manifest records.
    pub outputs: Vec<(String, PathBuf)>,
    pub metrics: Value,
}

fn require(path: &Option<PathBuf>, flag: &str, cmd: &Command) -> Result<PathBuf, CliError> {
    path.clone().ok_or_else(|| {
        CliError::Usage(
            format!("{} needs {flag} (or the matching paths.* config key)", cmd.name()),
            cmd.name(),
        )
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Dataset JSON when the path ends in `.json`, otherwise a raw corpus read
/// with the configured format, source and tokenizer.
pub fn load_data(path: &Path, cfg: &RunConfig) -> Result<Dataset, CliError> {
    if path.is_file() && path.extension().is_some_and(|e| e == "json") {
        Ok(Dataset::read_json(path)?)
    } else {
        Ok(corpus::load_dataset(path, cfg.data.format, cfg.data.source, &cfg.tokenizer)?)
    }
}

fn sizes(d: &Dataset) -> Value {
    json!({ "train": d.train.len(), "valid": d.valid.len(), "test": d.test.len() })
}

fn file_output(out: &Path) -> (String, PathBuf) {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| out.display().to_string());
    (name, out.to_path_buf())
}

fn read_lines(input: Option<&Path>) -> Result<String, CliError> {
    match input {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(p, e)),
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::io("<stdin>", e))?;
            Ok(s)
        }
    }
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let paths = &cfg.paths;
    match cmd {
        Command::Tokenize { input, .. } => {
            let text = read_lines(input.as_deref())?;
            let mut out = RunOutput::default();
            let (mut docs, mut toks) = (0usize, 0usize);
            for line in text.lines() {
                let tokens = tokenize(line, &cfg.tokenizer);
                docs += 1;
                toks += tokens.len();
                out.stdout.push_str(&serde_json::to_string(&tokens).map_err(irony_core::Error::from)?);
                out.stdout.push('\n');
            }
            if let Some(p) = input {
                out.inputs.push(("input".into(), p.clone()));
            }
            out.metrics = json!({ "documents": docs, "tokens": toks });
            Ok(out)
        }
        Command::Ingest { truncate, min_tokens, .. } => {
            let data = require(&paths.data, "--data", cmd)?;
            let out_path = require(&paths.out, "--out", cmd)?;
            let mut d = corpus::load_dataset(&data, cfg.data.format, cfg.data.source, &cfg.tokenizer)?;
            let mut metrics = json!({ "loaded": sizes(&d) });
            if truncate.is_some() || min_tokens.is_some() {
                let (f, report) = corpus::apply_tay_filter(&d, cfg.data.truncate, cfg.data.min_tokens)?;
                d = f;
                metrics["filter"] = to_value(&report);
            }
            d.write_json(&out_path)?;
            metrics["written"] = sizes(&d);
            Ok(RunOutput {
                inputs: vec![("data".into(), data)],
                outputs: vec![file_output(&out_path)],
                metrics,
                ..Default::default()
            })
        }
        Command::Filter { .. } => {
            let data = require(&paths.data, "--data", cmd)?;
            let out_path = require(&paths.out, "--out", cmd)?;
            let d = load_data(&data, cfg)?;
            let (f, report) = corpus::apply_tay_filter(&d, cfg.data.truncate, cfg.data.min_tokens)?;
            f.write_json(&out_path)?;
            Ok(RunOutput {
                inputs: vec![("data".into(), data)],
                outputs: vec![file_output(&out_path)],
                metrics: json!({ "filter": report, "written": sizes(&f) }),
                ..Default::default()
            })
        }
        Command::Augment { .. } => {
            let data = require(&paths.data, "--data", cmd)?;
            let pool_path = require(&paths.pool, "--pool", cmd)?;
            let out_path = require(&paths.out, "--out", cmd)?;
            let d = load_data(&data, cfg)?;
            let pool = corpus::load_pool(&pool_path, cfg.data.format, &cfg.tokenizer)?;
            let lang = LatinScriptHeuristic {
                threshold: cfg.language_threshold,
            };
            let (aug, report) = corpus::augment(&d, &pool, &lang, cfg.seed)?;
            aug.write_json(&out_path)?;
            Ok(RunOutput {
                inputs: vec![("data".into(), data), ("pool".into(), pool_path)],
                outputs: vec![file_output(&out_path)],
                metrics: json!({ "augment": report, "written": sizes(&aug) }),
                ..Default::default()
            })
        }
        Command::PretrainLm { .. } => {
            let corpus_path = require(&paths.corpus, "--corpus", cmd)?;
            let out_path = require(&paths.out, "--out", cmd)?;
            let text = fs::read_to_string(&corpus_path).map_err(|e| CliError::io(&corpus_path, e))?;
            let sentences: Vec<Vec<String>> = text
                .lines()
                .map(|l| tokenize(l, &cfg.tokenizer).into_iter().map(|t| t.surface).collect::<Vec<_>>())
                .filter(|s| !s.is_empty())
                .collect();
            let mut model = EncoderModel::from_corpus(cfg.encoder.clone(), &sentences, cfg.seed)?;
            let opts = PretrainOptions {
                checkpoint: None,
                ..cfg.pretrain.clone()
            };
            let log = pretrain_lm(&sentences, &mut model, &opts)?;
            encoder::save_encoder(&model, &out_path)?;
            Ok(RunOutput {
                inputs: vec![("corpus".into(), corpus_path)],
                outputs: vec![file_output(&out_path)],
                metrics: to_value(&log),
                ..Default::default()
            })
        }
        Command::Train { .. } => train_cmd(cmd, cfg),
        Command::Evaluate { split, ensemble, .. } => evaluate_cmd(cfg, split, ensemble.as_deref()),
        Command::Predict { input, .. } => {
            let model_path = require(&paths.model, "--model", cmd)?;
            let input = require(input, "--input", cmd)?;
            let model = ClassifierModel::load(&model_path)?;
            let text = fs::read_to_string(&input).map_err(|e| CliError::io(&input, e))?;
            let mut out = RunOutput::default();
            let mut n = 0usize;
            for (i, line) in text.lines().enumerate() {
                let (id, raw) = parse_predict_line(line, i + 1)?;
                let tokens = tokenize(&raw, &cfg.tokenizer);
                if tokens.is_empty() {
                    continue;
                }
                let example = Example {
                    id: id.clone(),
                    tokens,
                    label: Label::NonSarcastic,
                    source: cfg.data.source,
                };
                let p = model.predict(&example)?;
                out.stdout.push_str(&json!({ "id": id, "label": p.label, "p_sarcastic": p.p_sarcastic }).to_string());
                out.stdout.push('\n');
                n += 1;
            }
            if let Some(o) = &paths.out {
                fs::write(o, &out.stdout).map_err(|e| CliError::io(o, e))?;
                out.outputs.push(file_output(o));
            }
            out.inputs = vec![("model".into(), model_path), ("input".into(), input)];
            out.metrics = json!({ "predictions": n });
            Ok(out)
        }
        Command::Replay { .. } => unreachable!("replay is dispatched separately"),
    }
}

fn parse_predict_line(line: &str, n: usize) -> Result<(String, String), CliError> {
    let trimmed = line.trim_start();
    if trimmed.starts_with('{') {
        let v: Value = serde_json::from_str(trimmed).map_err(|e| irony_core::Error::MalformedRecord {
            line: n,
            reason: e.to_string(),
        })?;
        let text = v["text"].as_str().ok_or_else(|| irony_core::Error::MalformedRecord {
            line: n,
            reason: "missing string field \"text\"".into(),
        })?;
        let id = match &v["id"] {
            Value::String(s) => s.clone(),
            Value::Null => format!("line-{n}"),
            other => other.to_string(),
        };
        Ok((id, text.to_string()))
    } else {
        Ok((format!("line-{n}"), line.to_string()))
    }
}

fn member_summary(seed: u64, state: &TrainState) -> Value {
    json!({
        "seed": seed,
        "best_epoch": state.best_epoch,
        "best_val_accuracy": state.best_val_accuracy,
        "epochs": state.epoch,
        "final_lr": state.current_lr,
        "steps": state.steps,
    })
}

fn train_cmd(cmd: &Command, cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let data_path = require(&cfg.paths.data, "--data", cmd)?;
    let enc_path = require(&cfg.paths.encoder, "--encoder", cmd)?;
    let out_dir = require(&cfg.paths.out, "--out", cmd)?;
    let data = load_data(&data_path, cfg)?;
    let enc = Arc::new(encoder::load_encoder(&enc_path)?);
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let mut outputs = Vec::new();
    let mut members = Vec::new();
    if cfg.ensemble_size == 1 {
        let ck = out_dir.join("model.ck");
        let (_, state) = train::train_from_scratch(enc, &cfg.classifier, &data, &cfg.train, Some(&ck))?;
        let log = out_dir.join("train_log.jsonl");
        state.write_log(&log)?;
        members.push(member_summary(cfg.seed, &state));
        outputs.push(("model.ck".to_string(), ck));
        outputs.push(("train_log.jsonl".to_string(), log));
    } else {
        let seeds = ensemble_seeds(cfg.seed, cfg.ensemble_size);
        let runs = train::train_ensemble(enc, &cfg.classifier, &data, &cfg.train, &seeds, Some(&out_dir))?;
        for (i, ((_, state), seed)) in runs.iter().zip(&seeds).enumerate() {
            let log_name = format!("member-{i}.log.jsonl");
            let log = out_dir.join(&log_name);
            state.write_log(&log)?;
            members.push(member_summary(*seed, state));
            let ck_name = format!("member-{i}.ck");
            outputs.push((ck_name.clone(), out_dir.join(ck_name)));
            outputs.push((log_name, log));
        }
    }
    Ok(RunOutput {
        inputs: vec![("data".into(), data_path), ("encoder".into(), enc_path)],
        outputs,
        metrics: json!({ "members": members }),
        ..Default::default()
    })
}

/// Mean sarcasm probability over ensemble members.
struct MeanScorer<'a>(&'a [ClassifierModel]);

impl SarcasmScorer for MeanScorer<'_> {
    fn p_sarcastic(&self, example: &Example) -> irony_core::Result<f64> {
        let mut sum = 0.0;
        for m in self.0 {
            sum += m.predict(example)?.p_sarcastic;
        }
        Ok(sum / self.0.len() as f64)
    }
}

#[derive(Serialize)]
struct ScoreBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    members: Option<usize>,
    #[serde(flatten)]
    metrics: Option<MetricsReport>,
    paired: Option<PairedResult>,
}

fn load_members(dir: &Path) -> Result<Vec<(PathBuf, ClassifierModel)>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ck"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(
            format!("no .ck checkpoints in ensemble directory {}", dir.display()),
            "evaluate",
        ));
    }
    paths
        .into_iter()
        .map(|p| ClassifierModel::load(&p).map(|m| (p, m)).map_err(CliError::from))
        .collect()
}

fn evaluate_cmd(cfg: &RunConfig, split: &str, ensemble: Option<&Path>) -> Result<RunOutput, CliError> {
    let paths = &cfg.paths;
    if paths.model.is_none() && ensemble.is_none() {
        return Err(CliError::Usage("evaluate needs --model or --ensemble".into(), "evaluate"));
    }
    if paths.data.is_none() && paths.pairs.is_none() {
        return Err(CliError::Usage("evaluate needs --data or --pairs".into(), "evaluate"));
    }
    let split: Split = split.parse().map_err(|e: String| CliError::Usage(e, "evaluate"))?;
    let mut inputs = Vec::new();
    let examples: Option<Vec<Example>> = match &paths.data {
        Some(p) => {
            inputs.push(("data".to_string(), p.clone()));
            Some(load_data(p, cfg)?.split(split).to_vec())
        }
        None => None,
    };
    let pairs: Option<Vec<SarcPair>> = match &paths.pairs {
        Some(p) => {
            inputs.push(("pairs".to_string(), p.clone()));
            Some(corpus::load_sarc_pairs(p, &cfg.tokenizer)?)
        }
        None => None,
    };
    let labels: Option<Vec<Label>> = examples.as_ref().map(|ex| ex.iter().map(|e| e.label).collect());

    let single = match &paths.model {
        Some(p) => {
            inputs.push(("model".to_string(), p.clone()));
            let model = ClassifierModel::load(p)?;
            let metrics = match (&examples, &labels) {
                (Some(ex), Some(l)) => {
                    let preds = ex.iter().map(|e| model.predict(e).map(|p| p.label)).collect::<Result<Vec<_>, _>>()?;
                    Some(eval::metrics_report(&preds, l)?)
                }
                _ => None,
            };
            let paired = match &pairs {
                Some(pr) => Some(eval::sarc_paired_accuracy(pr, &model)?),
                None => None,
            };
            Some(ScoreBlock { members: None, metrics, paired })
        }
        None => None,
    };

    let voted = match ensemble {
        Some(dir) => {
            let loaded = load_members(dir)?;
            for (p, _) in &loaded {
                inputs.push(("ensemble-member".to_string(), p.clone()));
            }
            let models: Vec<ClassifierModel> = loaded.into_iter().map(|(_, m)| m).collect();
            let metrics = match (&examples, &labels) {
                (Some(ex), Some(l)) => {
                    let mut votes = Vec::with_capacity(models.len());
                    let mut probs = Vec::with_capacity(models.len());
                    for m in &models {
                        let preds = ex.iter().map(|e| m.predict(e)).collect::<Result<Vec<_>, _>>()?;
                        votes.push(preds.iter().map(|p| p.label).collect::<Vec<_>>());
                        probs.push(preds.iter().map(|p| p.p_sarcastic).collect::<Vec<_>>());
                    }
                    let combined = eval::ensemble_vote(&votes, Some(&probs))?;
                    Some(eval::metrics_report(&combined, l)?)
                }
                _ => None,
            };
            let paired = match &pairs {
                Some(pr) => Some(eval::sarc_paired_accuracy(pr, &MeanScorer(&models))?),
                None => None,
            };
            Some(ScoreBlock {
                members: Some(models.len()),
                metrics,
                paired,
            })
        }
        None => None,
    };

    let report = json!({
        "split": split.name(),
        "n_examples": examples.as_ref().map(Vec::len),
        "n_pairs": pairs.as_ref().map(Vec::len),
        "model": single,
        "ensemble": voted,
        "note": NON_REPRODUCIBILITY,
    });
    let text = serde_json::to_string_pretty(&report).map_err(irony_core::Error::from)? + "\n";
    let mut outputs = Vec::new();
    if let Some(o) = &paths.out {
        fs::write(o, &text).map_err(|e| CliError::io(o, e))?;
        outputs.push(file_output(o));
    }
    Ok(RunOutput {
        stdout: text,
        inputs,
        outputs,
        metrics: report,
    })
}
