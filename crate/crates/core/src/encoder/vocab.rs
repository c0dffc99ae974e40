use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Codepoint vocabulary with four reserved leading indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<char>", into = "Vec<char>")]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub const PAD: usize = 0;
    pub const BOW: usize = 1;
    pub const EOW: usize = 2;
    pub const UNK: usize = 3;
    const RESERVED: usize = 4;

    /// Every distinct codepoint in `texts`, in codepoint order.
    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        let mut chars: Vec<char> = texts.into_iter().flat_map(str::chars).collect();
        chars.sort_unstable();
        chars.dedup();
        Self::from(chars)
    }

    pub fn len(&self) -> usize {
        Self::RESERVED + self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(Self::UNK)
    }

    /// `[BOW, c_1 .. c_n, EOW]` with at most `max_chars` characters.
    pub fn encode_word(&self, word: &str, max_chars: usize) -> Vec<usize> {
        let mut ids = Vec::with_capacity(max_chars.min(word.len()) + 2);
        ids.push(Self::BOW);
        ids.extend(word.chars().take(max_chars).map(|c| self.id(c)));
        ids.push(Self::EOW);
        ids
    }
}

impl From<Vec<char>> for CharVocab {
    fn from(mut chars: Vec<char>) -> Self {
        let mut seen = std::collections::HashSet::new();
        chars.retain(|c| seen.insert(*c));
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + Self::RESERVED))
            .collect();
        CharVocab { chars, index }
    }
}

impl From<CharVocab> for Vec<char> {
    fn from(v: CharVocab) -> Self {
        v.chars
    }
}

/// Output vocabulary of the language-model softmax. Index 0 is the unknown
/// bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct WordVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordVocab {
    pub const UNK: usize = 0;
    pub const UNK_TOKEN: &'static str = "<unk>";

    /// The `cap` most frequent words (ties in lexicographic order) plus the
    /// unknown bucket.
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>], cap: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sent in corpus {
            for w in sent {
                *counts.entry(w.as_ref()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(w, _)| *w != Self::UNK_TOKEN)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(cap);
        Self::from_words(ranked.into_iter().map(|(w, _)| w.to_string()))
    }

    /// Vocabulary with the given words in the given order after the unknown
    /// bucket.
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut list = vec![Self::UNK_TOKEN.to_string()];
        list.extend(words.into_iter().filter(|w| w != Self::UNK_TOKEN));
        Self::from(list)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, w: &str) -> usize {
        self.index.get(w).copied().unwrap_or(Self::UNK)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }
}

impl From<Vec<String>> for WordVocab {
    fn from(mut words: Vec<String>) -> Self {
        if words.first().map(String::as_str) != Some(Self::UNK_TOKEN) {
            words.insert(0, Self::UNK_TOKEN.to_string());
        }
        let mut seen = std::collections::HashSet::new();
        words.retain(|w| seen.insert(w.clone()));
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        WordVocab { words, index }
    }
}

impl From<WordVocab> for Vec<String> {
    fn from(v: WordVocab) -> Self {
        v.words
    }
}
