//! Labelled datasets: ingestion from TSV/JSONL, the length filter used for
//! the Twitter and dialog benchmarks, paired Reddit items, and augmentation
//! from an external hashtag-collected pool.
//!
//! # File formats
//!
//! * TSV: `label<TAB>text`, optionally followed by `<TAB>split`. A first line
//!   whose label column reads `label` is a header and skipped. Texts cannot
//!   contain tabs.
//! * JSONL: one object per line with `text`, `label` (`0`/`1` as number or
//!   string), optional `id` and optional `split`.
//! * Paired items: JSONL `{"context_id", "a", "b", "sarcastic"}` where
//!   `sarcastic` is `"a"` or `"b"`. Alternatively `label_a`/`label_b` may
//!   carry one binary label per statement.
//!
//! A directory path holds per-split files `train`, `valid` (or `dev`) and
//! `test` with a `.tsv` or `.jsonl` extension. A single file keeps the split
//! column and defaults to `train`. Blank lines are skipped everywhere.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::text::{detokenize, extract_hashtags, tokenize, LanguageFilter, Token, TokenizerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    NonSarcastic = 0,
    Sarcastic = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::NonSarcastic),
            1 => Some(Label::Sarcastic),
            _ => None,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Label::from_index(v as usize).ok_or_else(|| format!("label {v} is not 0 or 1"))
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Twitter,
    Reddit,
    Dialog,
    External,
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "twitter" => Ok(Source::Twitter),
            "reddit" => Ok(Source::Reddit),
            "dialog" => Ok(Source::Dialog),
            "external" => Ok(Source::External),
            other => Err(Error::Config(format!(
                "source must be twitter, reddit, dialog or external, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub tokens: Vec<Token>,
    pub label: Label,
    pub source: Source,
}

impl Example {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
    pub truncation_limit: Option<usize>,
    pub min_tokens: Option<usize>,
}

impl Dataset {
    pub fn split(&self, s: Split) -> &[Example] {
        match s {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, s: Split) -> &mut Vec<Example> {
        match s {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    /// Checks id uniqueness across splits, non-empty token lists, and the
    /// declared length bounds.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in self.examples() {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::MalformedRecord {
                    line: 0,
                    reason: format!("duplicate example id {:?}", e.id),
                });
            }
            let bad_len = e.is_empty()
                || self.truncation_limit.is_some_and(|l| e.len() > l)
                || self.min_tokens.is_some_and(|m| e.len() < m);
            if bad_len {
                return Err(Error::MalformedRecord {
                    line: 0,
                    reason: format!("example {:?} has {} tokens, outside the dataset bounds", e.id, e.len()),
                });
            }
        }
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Dataset> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d: Dataset = serde_json::from_str(&text)?;
        d.validate()?;
        Ok(d)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    TsvLabelText,
    Jsonl,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" | "tsv_label_text" => Ok(Format::TsvLabelText),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::Config(format!("format must be tsv or jsonl, got {other:?}"))),
        }
    }
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::TsvLabelText => "tsv",
            Format::Jsonl => "jsonl",
        }
    }
}

struct RawRecord {
    line: usize,
    id: Option<String>,
    text: String,
    label: Label,
    split: Option<Split>,
}

fn parse_label(raw: &str, line: usize) -> Result<Label> {
    match raw.trim() {
        "0" => Ok(Label::NonSarcastic),
        "1" => Ok(Label::Sarcastic),
        other => Err(Error::UnknownLabel {
            line,
            label: other.to_string(),
        }),
    }
}

fn parse_split(raw: &str, line: usize) -> Result<Split> {
    raw.parse()
        .map_err(|reason| Error::MalformedRecord { line, reason })
}

fn parse_records(content: &str, format: Format) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, raw_line) in content.lines().enumerate() {
        let line = i + 1;
        let l = raw_line.trim_end_matches('\r');
        if l.trim().is_empty() {
            continue;
        }
        let rec = match format {
            Format::TsvLabelText => {
                let cols: Vec<&str> = l.split('\t').collect();
                if line == 1 && cols[0].trim().eq_ignore_ascii_case("label") {
                    continue;
                }
                if !(2..=3).contains(&cols.len()) {
                    return Err(Error::MalformedRecord {
                        line,
                        reason: format!("expected label<TAB>text[<TAB>split], found {} columns", cols.len()),
                    });
                }
                RawRecord {
                    line,
                    id: None,
                    label: parse_label(cols[0], line)?,
                    text: cols[1].to_string(),
                    split: cols.get(2).map(|s| parse_split(s, line)).transpose()?,
                }
            }
            Format::Jsonl => {
                let v: Value = serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                    line,
                    reason: e.to_string(),
                })?;
                let text = v
                    .get("text")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::MalformedRecord {
                        line,
                        reason: "missing string field \"text\"".into(),
                    })?
                    .to_string();
                let label = match v.get("label") {
                    Some(Value::Number(n)) => parse_label(&n.to_string(), line)?,
                    Some(Value::String(s)) => parse_label(s, line)?,
                    Some(other) => parse_label(&other.to_string(), line)?,
                    None => {
                        return Err(Error::MalformedRecord {
                            line,
                            reason: "missing field \"label\"".into(),
                        })
                    }
                };
                let id = match v.get("id") {
                    None | Some(Value::Null) => None,
                    Some(Value::String(s)) => Some(s.clone()),
                    Some(other) => Some(other.to_string()),
                };
                let split = v
                    .get("split")
                    .and_then(Value::as_str)
                    .map(|s| parse_split(s, line))
                    .transpose()?;
                RawRecord {
                    line,
                    id,
                    text,
                    label,
                    split,
                }
            }
        };
        out.push(rec);
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a labelled dataset from a file (split column) or a directory of
/// per-split files, tokenizing every text with `cfg`. Records whose token
/// list ends up empty are dropped.
pub fn load_dataset(path: &Path, format: Format, source: Source, cfg: &TokenizerConfig) -> Result<Dataset> {
    cfg.validate()?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut d = Dataset {
        name,
        ..Dataset::default()
    };
    let mut seen = HashSet::new();
    let mut push = |d: &mut Dataset, rec: RawRecord, default_split: Split, file_tag: &str| -> Result<()> {
        let split = rec.split.unwrap_or(default_split);
        let id = rec.id.unwrap_or_else(|| format!("{file_tag}-{}", rec.line));
        if !seen.insert(id.clone()) {
            return Err(Error::MalformedRecord {
                line: rec.line,
                reason: format!("duplicate id {id:?}"),
            });
        }
        let tokens = tokenize(&rec.text, cfg);
        if tokens.is_empty() {
            log::warn!("{file_tag} line {}: no tokens left after tokenization, dropped", rec.line);
            return Ok(());
        }
        d.split_mut(split).push(Example {
            id,
            tokens,
            label: rec.label,
            source,
        });
        Ok(())
    };
    if path.is_dir() {
        let ext = format.extension();
        for (split, stems) in [
            (Split::Train, &["train"][..]),
            (Split::Valid, &["valid", "dev"][..]),
            (Split::Test, &["test"][..]),
        ] {
            let Some(file) = stems
                .iter()
                .map(|s| path.join(format!("{s}.{ext}")))
                .find(|p| p.is_file())
            else {
                continue;
            };
            for rec in parse_records(&read_text(&file)?, format)? {
                if rec.split.is_some_and(|s| s != split) {
                    return Err(Error::MalformedRecord {
                        line: rec.line,
                        reason: format!("record in {} declares another split", file.display()),
                    });
                }
                push(&mut d, rec, split, split.name())?;
            }
        }
    } else {
        for rec in parse_records(&read_text(path)?, format)? {
            push(&mut d, rec, Split::Train, "line")?;
        }
    }
    Ok(d)
}

/// Counts from one application of [`apply_tay_filter`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub truncated: usize,
    pub removed: usize,
    pub kept: usize,
}

/// Drops examples shorter than `min_tokens` from every split and cuts the
/// rest to their first `truncation_limit` tokens.
pub fn apply_tay_filter(d: &Dataset, truncation_limit: usize, min_tokens: usize) -> Result<(Dataset, FilterReport)> {
    if min_tokens == 0 || truncation_limit < min_tokens {
        return Err(Error::Config(format!(
            "need 1 ≤ min_tokens ≤ truncation_limit, got {min_tokens} and {truncation_limit}"
        )));
    }
    let mut report = FilterReport::default();
    let mut out = Dataset {
        name: d.name.clone(),
        truncation_limit: Some(d.truncation_limit.map_or(truncation_limit, |l| l.min(truncation_limit))),
        min_tokens: Some(d.min_tokens.map_or(min_tokens, |m| m.max(min_tokens))),
        ..Dataset::default()
    };
    for s in Split::ALL {
        for e in d.split(s) {
            if e.len() < min_tokens {
                report.removed += 1;
                continue;
            }
            let mut e = e.clone();
            if e.len() > truncation_limit {
                e.tokens.truncate(truncation_limit);
                report.truncated += 1;
            }
            report.kept += 1;
            out.split_mut(s).push(e);
        }
    }
    Ok((out, report))
}

/// Hashtag-collected external examples. Every example has source
/// `external`; positives are labelled 1 and negatives 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationPool {
    pub positive: Vec<Example>,
    pub negative: Vec<Example>,
}

impl AugmentationPool {
    pub fn len(&self) -> usize {
        self.positive.len() + self.negative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The hashtags used to collect the positive pool. They are stripped from
/// pool texts since they are the soft labels themselves.
pub const POOL_LABEL_HASHTAGS: [&str; 2] = ["#sarcasm", "#irony"];

/// Loads an augmentation pool from the same formats as [`load_dataset`],
/// ignoring any split column. Label 1 rows become positives.
pub fn load_pool(path: &Path, format: Format, cfg: &TokenizerConfig) -> Result<AugmentationPool> {
    let mut artifacts: BTreeSet<String> = cfg.artifact_hashtags.clone();
    artifacts.extend(POOL_LABEL_HASHTAGS.iter().map(|s| s.to_string()));
    let pool_cfg = TokenizerConfig {
        strip_artifact_hashtags: true,
        ..cfg.clone()
    }
    .with_artifacts(artifacts)?;
    let mut pool = AugmentationPool::default();
    for rec in parse_records(&read_text(path)?, format)? {
        let tokens = tokenize(&rec.text, &pool_cfg);
        if tokens.is_empty() {
            continue;
        }
        let e = Example {
            id: rec.id.unwrap_or_else(|| format!("pool-{}", rec.line)),
            tokens,
            label: rec.label,
            source: Source::External,
        };
        match rec.label {
            Label::Sarcastic => pool.positive.push(e),
            Label::NonSarcastic => pool.negative.push(e),
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentReport {
    /// Examples added per class (`N`).
    pub per_class: usize,
    pub language_rejected: usize,
    pub qualifying_positive: usize,
    pub qualifying_negative: usize,
}

fn choose<'a>(items: &[&'a Example], n: usize, rng: &mut ChaCha8Rng) -> Vec<&'a Example> {
    if items.len() <= n {
        return items.to_vec();
    }
    let mut idx = sample(rng, items.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i]).collect()
}

/// Adds `N` positives and `N` negatives from `pool` to the training split,
/// where `N` is the smaller count of language-accepted pool items that share
/// at least one hashtag (case-insensitive) with any split of `target` and
/// meet its `min_tokens` bound. Added texts are cut to the target's
/// truncation limit. The larger side is subsampled with `seed`; the
/// selected items keep pool order and gain an `aug-` id prefix.
pub fn augment<F>(target: &Dataset, pool: &AugmentationPool, lang: &F, seed: u64) -> Result<(Dataset, AugmentReport)>
where
    F: LanguageFilter + ?Sized,
{
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let tags = extract_hashtags(target.examples().flat_map(|e| &e.tokens));
    let mut report = AugmentReport::default();
    let mut qualify = |side: &'_ [Example]| -> Vec<usize> {
        let mut keep = Vec::new();
        for (i, e) in side.iter().enumerate() {
            if !lang.accepts(&detokenize(&e.tokens)) {
                report.language_rejected += 1;
                continue;
            }
            let long_enough = target.min_tokens.is_none_or(|m| e.len() >= m);
            if long_enough && !extract_hashtags(&e.tokens).is_disjoint(&tags) {
                keep.push(i);
            }
        }
        keep
    };
    let pos_idx = qualify(&pool.positive);
    let neg_idx = qualify(&pool.negative);
    if pos_idx.is_empty() && neg_idx.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let pos: Vec<&Example> = pos_idx.iter().map(|&i| &pool.positive[i]).collect();
    let neg: Vec<&Example> = neg_idx.iter().map(|&i| &pool.negative[i]).collect();
    report.qualifying_positive = pos.len();
    report.qualifying_negative = neg.len();
    let n = pos.len().min(neg.len());
    report.per_class = n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen_pos = choose(&pos, n, &mut rng);
    let chosen_neg = choose(&neg, n, &mut rng);
    let mut out = target.clone();
    let mut ids: HashSet<String> = target.examples().map(|e| e.id.clone()).collect();
    for (e, label) in chosen_pos
        .into_iter()
        .map(|e| (e, Label::Sarcastic))
        .chain(chosen_neg.into_iter().map(|e| (e, Label::NonSarcastic)))
    {
        let mut id = format!("aug-{}", e.id);
        while !ids.insert(id.clone()) {
            id.push('\'');
        }
        let mut tokens = e.tokens.clone();
        if let Some(limit) = out.truncation_limit {
            tokens.truncate(limit);
        }
        out.train.push(Example {
            id,
            tokens,
            label,
            source: Source::External,
        });
    }
    Ok((out, report))
}

/// Which statement of a pair is the sarcastic one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSide {
    A,
    B,
}

impl PairSide {
    pub fn other(self) -> PairSide {
        match self {
            PairSide::A => PairSide::B,
            PairSide::B => PairSide::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SarcPair {
    pub context_id: String,
    pub statement_a: Example,
    pub statement_b: Example,
    pub sarcastic_index: PairSide,
}

impl SarcPair {
    /// The same pair with the statements exchanged.
    pub fn swapped(&self) -> SarcPair {
        SarcPair {
            context_id: self.context_id.clone(),
            statement_a: self.statement_b.clone(),
            statement_b: self.statement_a.clone(),
            sarcastic_index: self.sarcastic_index.other(),
        }
    }

    fn check(&self, line: usize) -> Result<()> {
        let labels = (self.statement_a.label, self.statement_b.label);
        let ok = match self.sarcastic_index {
            PairSide::A => labels == (Label::Sarcastic, Label::NonSarcastic),
            PairSide::B => labels == (Label::NonSarcastic, Label::Sarcastic),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BothOrNeitherSarcastic { line })
        }
    }
}

fn pair_side(v: &Value, line: usize) -> Result<PairSide> {
    let flags: Vec<&str> = match v {
        Value::String(s) => vec![s.as_str()],
        Value::Array(items) => items.iter().filter_map(Value::as_str).collect(),
        _ => {
            return Err(Error::MalformedRecord {
                line,
                reason: "\"sarcastic\" must be \"a\", \"b\" or a list of them".into(),
            })
        }
    };
    let mut a = false;
    let mut b = false;
    for f in flags {
        match f.to_ascii_lowercase().as_str() {
            "a" => a = true,
            "b" => b = true,
            "both" => (a, b) = (true, true),
            "none" | "neither" => {}
            other => {
                return Err(Error::MalformedRecord {
                    line,
                    reason: format!("unknown sarcastic marker {other:?}"),
                })
            }
        }
    }
    match (a, b) {
        (true, false) => Ok(PairSide::A),
        (false, true) => Ok(PairSide::B),
        _ => Err(Error::BothOrNeitherSarcastic { line }),
    }
}

/// Reads paired items, keeping file order.
pub fn load_sarc_pairs(path: &Path, cfg: &TokenizerConfig) -> Result<Vec<SarcPair>> {
    parse_sarc_pairs(&read_text(path)?, cfg)
}

pub fn parse_sarc_pairs(content: &str, cfg: &TokenizerConfig) -> Result<Vec<SarcPair>> {
    let mut out = Vec::new();
    for (i, l) in content.lines().enumerate() {
        let line = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRecord { line, reason };
        let v: Value = serde_json::from_str(l).map_err(|e| malformed(e.to_string()))?;
        let context_id = match v.get("context_id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(malformed("missing \"context_id\"".into())),
        };
        let text = |k: &str| {
            v.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| malformed(format!("missing string field {k:?}")))
        };
        let (a, b) = (text("a")?, text("b")?);
        let side = match (v.get("sarcastic"), v.get("label_a"), v.get("label_b")) {
            (Some(s), _, _) => pair_side(s, line)?,
            (None, Some(la), Some(lb)) => {
                let la = parse_label(&la.to_string().replace('"', ""), line)?;
                let lb = parse_label(&lb.to_string().replace('"', ""), line)?;
                match (la, lb) {
                    (Label::Sarcastic, Label::NonSarcastic) => PairSide::A,
                    (Label::NonSarcastic, Label::Sarcastic) => PairSide::B,
                    _ => return Err(Error::BothOrNeitherSarcastic { line }),
                }
            }
            _ => return Err(malformed("missing \"sarcastic\" marker".into())),
        };
        let statement = |text: &str, which: &str, sarcastic: bool| Example {
            id: format!("{context_id}/{which}"),
            tokens: tokenize(text, cfg),
            label: if sarcastic { Label::Sarcastic } else { Label::NonSarcastic },
            source: Source::Reddit,
        };
        let pair = SarcPair {
            statement_a: statement(&a, "a", side == PairSide::A),
            statement_b: statement(&b, "b", side == PairSide::B),
            context_id,
            sarcastic_index: side,
        };
        if pair.statement_a.is_empty() || pair.statement_b.is_empty() {
            return Err(malformed("a statement has no tokens".into()));
        }
        pair.check(line)?;
        out.push(pair);
    }
    Ok(out)
}
