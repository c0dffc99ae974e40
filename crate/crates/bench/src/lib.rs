//! Shared fixtures for the criterion benches.

use irony_core::corpus::{Example, Label, Source};
use irony_core::text::{tokenize, TokenizerConfig};

pub const TWEETS: [&str; 4] = [
    "@friend I just LOVE waiting two hours for a bus 🙄 #not #mondays",
    "Great, another meeting that could have been an email :) http://t.co/x",
    "what a beautiful sunny day at the beach with my family",
    "Oh sure, because THAT always works... #sarcasm #fail",
];

/// `n` examples cycling through [`TWEETS`], alternating labels.
pub fn examples(n: usize) -> Vec<Example> {
    let cfg = TokenizerConfig::stripping();
    (0..n)
        .map(|i| Example {
            id: format!("b{i}"),
            tokens: tokenize(TWEETS[i % TWEETS.len()], &cfg),
            label: Label::from_index(i % 2).expect("0 or 1"),
            source: Source::Twitter,
        })
        .collect()
}
