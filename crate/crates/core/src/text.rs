//! Cue-preserving tokenization for social-media and dialogue text.
//!
//! The tokenizer is a Twokenizer-style scanner that keeps everything a
//! character-level encoder can exploit: case, punctuation runs, emoticons,
//! emoji and hashtags all survive as tokens. The only normalization applied
//! is the replacement of user mentions and URLs by the placeholders
//! [`USER_PLACEHOLDER`] and [`URL_PLACEHOLDER`], plus optional removal of
//! the hashtags that were used to collect a dataset.
//!
//! Scanning rules, tried in order at every token start:
//!
//! 1. the literal placeholders `<user>` and `<url>`;
//! 2. URLs: `(?i)(?:[a-z][a-z0-9+.-]*://|www\.)\S+` with trailing
//!    `.,;:!?)]}'"` characters given back to the stream;
//! 3. mentions: `@[A-Za-z0-9_]+`, when the `@` does not directly follow a
//!    letter or digit (so e-mail addresses are not mentions);
//! 4. hashtags: `#` followed by one or more letters, digits or `_`;
//! 5. emoticons from [`EMOTICONS`], longest match first; an emoticon that
//!    ends in a letter or digit must not be followed by one;
//! 6. emoji: one pictographic codepoint plus any variation selectors, skin
//!    tone modifiers and zero-width-joiner continuations; regional indicator
//!    pairs form one flag;
//! 7. words and numbers: runs of letters, digits and `_`, with `'`, `’` and
//!    `-` allowed between word characters and `.`, `,`, `:` allowed between
//!    digits; a run made only of digits and separators is a number;
//! 8. punctuation: runs of one repeated character, or mixed runs of `!`
//!    and `?`;
//! 9. anything else becomes a single-codepoint `other` token.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const USER_PLACEHOLDER: &str = "<user>";
pub const URL_PLACEHOLDER: &str = "<url>";

/// Default artifact hashtags: the tags used to collect irony corpora.
pub const DEFAULT_ARTIFACT_HASHTAGS: [&str; 3] = ["#sarcasm", "#irony", "#not"];

/// Emoticon inventory recognised as single tokens. Unknown ASCII art falls
/// through to punctuation tokens.
pub const EMOTICONS: &[&str] = &[
    ">:-(", ">:(", ":'-(", ":-)", ":)", ":-(", ":(", ";-)", ";)", ":-D", ":D", ":-P", ":P",
    ":-p", ":p", ";-P", ";P", ";p", ":'(", ":-/", ":/", ":-|", ":|", ":-O", ":O", ":-o", ":o",
    ":-*", ":*", "<3", "</3", "^_^", "^^", "-_-", "o_O", "O_o", "T_T", "=)", "=(", "=D", "xD",
    "XD", "D:",
];

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:[a-z][a-z0-9+.\-]*://|www\.)\S+").unwrap());
static MENTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^@[A-Za-z0-9_]+").unwrap());
static EMOTICONS_BY_LEN: LazyLock<Vec<&'static str>> = LazyLock::new(|| {
    let mut v = EMOTICONS.to_vec();
    v.sort_by_key(|e| std::cmp::Reverse(e.len()));
    v
});

const URL_TRAILING: &[char] = &['.', ',', ';', ':', '!', '?', ')', ']', '}', '\'', '"'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Hashtag,
    MentionPlaceholder,
    UrlPlaceholder,
    Emoji,
    Emoticon,
    Punctuation,
    Number,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.surface
    }
}

impl Token {
    pub fn new(surface: impl Into<String>, kind: TokenKind) -> Self {
        let surface = surface.into();
        debug_assert!(!surface.is_empty());
        Token { surface, kind }
    }

    pub fn is_placeholder(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::MentionPlaceholder | TokenKind::UrlPlaceholder
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub strip_artifact_hashtags: bool,
    /// Lowercased; every entry starts with `#`.
    pub artifact_hashtags: BTreeSet<String>,
    pub max_token_chars: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            strip_artifact_hashtags: false,
            artifact_hashtags: DEFAULT_ARTIFACT_HASHTAGS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            max_token_chars: 50,
        }
    }
}

impl TokenizerConfig {
    pub fn stripping() -> Self {
        TokenizerConfig {
            strip_artifact_hashtags: true,
            ..Default::default()
        }
    }

    /// Replaces the artifact set. Entries are lowercased; an entry without a
    /// leading `#` is rejected.
    pub fn with_artifacts<I, S>(mut self, tags: I) -> crate::Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for tag in tags {
            let tag = tag.as_ref().trim();
            if !tag.starts_with('#') || tag.len() < 2 {
                return Err(crate::Error::Config(format!(
                    "artifact hashtag {tag:?} must start with '#'"
                )));
            }
            set.insert(tag.to_lowercase());
        }
        self.artifact_hashtags = set;
        Ok(self)
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.max_token_chars == 0 {
            return Err(crate::Error::Config("max_token_chars must be positive".into()));
        }
        if let Some(bad) = self.artifact_hashtags.iter().find(|t| !t.starts_with('#')) {
            return Err(crate::Error::Config(format!(
                "artifact hashtag {bad:?} must start with '#'"
            )));
        }
        Ok(())
    }

    fn is_artifact(&self, hashtag: &str) -> bool {
        self.strip_artifact_hashtags && self.artifact_hashtags.contains(&hashtag.to_lowercase())
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || is_combining_mark(c)
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

fn is_emoji_base(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2300..=0x23FF
        | 0x2B00..=0x2BFF
        | 0x203C | 0x2049 | 0x3030 | 0x303D | 0x3297 | 0x3299)
}

fn is_emoji_modifier(c: char) -> bool {
    matches!(c as u32, 0xFE0E | 0xFE0F | 0x1F3FB..=0x1F3FF | 0x20E3 | 0xE0020..=0xE007F)
}

fn is_regional_indicator(c: char) -> bool {
    matches!(c as u32, 0x1F1E6..=0x1F1FF)
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '“' | '”' | '‘' | '’' | '«' | '»' | '…' | '–' | '—' | '¡' | '¿' | '·' | '•' | '„'
                | '‹' | '›' | '′' | '″'
        )
}

struct Scanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn prev_char(&self) -> Option<char> {
        self.text[..self.pos].chars().next_back()
    }

    fn take(&mut self, len: usize) -> &'a str {
        let s = &self.text[self.pos..self.pos + len];
        self.pos += len;
        s
    }

    fn placeholder(&self) -> Option<(usize, TokenKind)> {
        let rest = self.rest();
        if rest.starts_with(USER_PLACEHOLDER) {
            Some((USER_PLACEHOLDER.len(), TokenKind::MentionPlaceholder))
        } else if rest.starts_with(URL_PLACEHOLDER) {
            Some((URL_PLACEHOLDER.len(), TokenKind::UrlPlaceholder))
        } else {
            None
        }
    }

    fn url(&self) -> Option<usize> {
        let m = URL_RE.find(self.rest())?;
        let trimmed = m.as_str().trim_end_matches(URL_TRAILING);
        // keep at least the scheme or "www." prefix
        Some(trimmed.len().max(1))
    }

    fn mention(&self) -> Option<usize> {
        if self.prev_char().is_some_and(is_word_char) {
            return None;
        }
        MENTION_RE.find(self.rest()).map(|m| m.end())
    }

    fn hashtag(&self) -> Option<usize> {
        let rest = self.rest();
        let body = rest.strip_prefix('#')?;
        let len: usize = body
            .chars()
            .take_while(|&c| is_word_char(c))
            .map(char::len_utf8)
            .sum();
        (len > 0).then_some(1 + len)
    }

    fn emoticon(&self) -> Option<usize> {
        let rest = self.rest();
        EMOTICONS_BY_LEN.iter().find_map(|e| {
            if !rest.starts_with(e) {
                return None;
            }
            let last = e.chars().next_back().unwrap();
            let next = rest[e.len()..].chars().next();
            if last.is_alphanumeric() && next.is_some_and(is_word_char) {
                return None;
            }
            let first = e.chars().next().unwrap();
            if first.is_alphanumeric() && self.prev_char().is_some_and(is_word_char) {
                return None;
            }
            Some(e.len())
        })
    }

    fn emoji(&self) -> Option<usize> {
        let mut chars = self.rest().char_indices().peekable();
        let (_, first) = chars.next()?;
        if !is_emoji_base(first) {
            return None;
        }
        let mut end = first.len_utf8();
        if is_regional_indicator(first) {
            if let Some(&(i, c)) = chars.peek() {
                if is_regional_indicator(c) {
                    return Some(i + c.len_utf8());
                }
            }
            return Some(end);
        }
        while let Some(&(i, c)) = chars.peek() {
            if is_emoji_modifier(c) {
                chars.next();
                end = i + c.len_utf8();
            } else if c == '\u{200D}' {
                chars.next();
                match chars.peek() {
                    Some(&(j, d)) if is_emoji_base(d) => {
                        chars.next();
                        end = j + d.len_utf8();
                    }
                    _ => break,
                }
            } else {
                break;
            }
        }
        Some(end)
    }

    /// Word or number run starting at the current position.
    fn word(&self) -> Option<(usize, TokenKind)> {
        let rest = self.rest();
        let chars: Vec<(usize, char)> = rest.char_indices().collect();
        if chars.is_empty() || !is_word_char(chars[0].1) {
            return None;
        }
        let mut end_idx = 0;
        let mut k = 0;
        while k < chars.len() {
            let c = chars[k].1;
            if is_word_char(c) {
                end_idx = k + 1;
                k += 1;
                continue;
            }
            let prev = chars[k - 1].1;
            let next = chars.get(k + 1).map(|p| p.1);
            let joins = match c {
                '\'' | '’' | '-' => next.is_some_and(is_word_char),
                '.' | ',' | ':' => prev.is_ascii_digit() && next.is_some_and(|n| n.is_ascii_digit()),
                _ => false,
            };
            if !joins {
                break;
            }
            k += 1;
        }
        let end = chars.get(end_idx).map_or(rest.len(), |p| p.0);
        let run = &rest[..end];
        let numeric = run
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | ':'));
        let kind = if numeric {
            TokenKind::Number
        } else {
            TokenKind::Word
        };
        Some((end, kind))
    }

    fn punctuation(&self) -> Option<usize> {
        let rest = self.rest();
        let first = rest.chars().next()?;
        if !is_punctuation(first) {
            return None;
        }
        let exclaim = matches!(first, '!' | '?');
        let len = rest
            .chars()
            .take_while(|&c| {
                if exclaim {
                    matches!(c, '!' | '?')
                } else {
                    c == first
                }
            })
            .map(char::len_utf8)
            .sum();
        Some(len)
    }
}

fn truncate_chars(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Splits raw text into cue-preserving tokens.
///
/// Deterministic and allocation-light; empty or all-whitespace input yields
/// an empty sequence.
pub fn tokenize(raw: &str, cfg: &TokenizerConfig) -> Vec<Token> {
    let mut sc = Scanner { text: raw, pos: 0 };
    let mut out = Vec::new();
    while let Some(c) = sc.peek() {
        if c.is_whitespace() {
            sc.pos += c.len_utf8();
            continue;
        }
        if let Some((len, kind)) = sc.placeholder() {
            out.push(Token::new(sc.take(len), kind));
        } else if let Some(len) = sc.url() {
            sc.take(len);
            out.push(Token::new(URL_PLACEHOLDER, TokenKind::UrlPlaceholder));
        } else if let Some(len) = sc.mention() {
            sc.take(len);
            out.push(Token::new(USER_PLACEHOLDER, TokenKind::MentionPlaceholder));
        } else if let Some(len) = sc.hashtag() {
            let tag = sc.take(len);
            if !cfg.is_artifact(tag) {
                out.push(Token::new(
                    truncate_chars(tag, cfg.max_token_chars),
                    TokenKind::Hashtag,
                ));
            }
        } else if let Some(len) = sc.emoticon() {
            out.push(Token::new(sc.take(len), TokenKind::Emoticon));
        } else if let Some(len) = sc.emoji() {
            let s = sc.take(len);
            out.push(Token::new(truncate_chars(s, cfg.max_token_chars), TokenKind::Emoji));
        } else if let Some((len, kind)) = sc.word() {
            let s = sc.take(len);
            out.push(Token::new(truncate_chars(s, cfg.max_token_chars), kind));
        } else if let Some(len) = sc.punctuation() {
            let s = sc.take(len);
            out.push(Token::new(
                truncate_chars(s, cfg.max_token_chars),
                TokenKind::Punctuation,
            ));
        } else {
            out.push(Token::new(sc.take(c.len_utf8()), TokenKind::Other));
        }
    }
    out
}

/// Joins token surfaces with single spaces.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&t.surface);
    }
    s
}

/// Lowercased, deduplicated hashtag surfaces (including the `#`).
pub fn extract_hashtags<'a, I>(tokens: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a Token>,
{
    tokens
        .into_iter()
        .filter(|t| t.kind == TokenKind::Hashtag)
        .map(|t| t.surface.to_lowercase())
        .collect()
}

/// Language predicate used to screen augmentation data.
pub trait LanguageFilter {
    fn accepts(&self, raw: &str) -> bool;
}

impl<F: Fn(&str) -> bool> LanguageFilter for F {
    fn accepts(&self, raw: &str) -> bool {
        self(raw)
    }
}

/// Built-in English guesser: the fraction of word and hashtag tokens that
/// are written in Latin script must reach `threshold` (default 0.5). Text
/// with no word-like tokens at all is rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatinScriptHeuristic {
    pub threshold: f64,
}

impl Default for LatinScriptHeuristic {
    fn default() -> Self {
        LatinScriptHeuristic { threshold: 0.5 }
    }
}

fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic() || matches!(c as u32, 0x00C0..=0x024F if c != '×' && c != '÷')
}

fn is_latin_word(word: &str) -> bool {
    let mut letters = 0;
    for c in word.chars() {
        if c.is_alphabetic() {
            if !is_latin_letter(c) {
                return false;
            }
            letters += 1;
        }
    }
    letters > 0
}

impl LatinScriptHeuristic {
    pub fn score(&self, raw: &str) -> Option<f64> {
        let tokens = tokenize(raw, &TokenizerConfig::default());
        let words: Vec<&str> = tokens
            .iter()
            .filter_map(|t| match t.kind {
                TokenKind::Word => Some(t.surface.as_str()),
                TokenKind::Hashtag => Some(&t.surface[1..]),
                _ => None,
            })
            .collect();
        if words.is_empty() {
            return None;
        }
        let latin = words.iter().filter(|w| is_latin_word(w)).count();
        Some(latin as f64 / words.len() as f64)
    }
}

impl LanguageFilter for LatinScriptHeuristic {
    fn accepts(&self, raw: &str) -> bool {
        self.score(raw).is_some_and(|s| s >= self.threshold)
    }
}

pub fn is_english(raw: &str) -> bool {
    LatinScriptHeuristic::default().accepts(raw)
}
