//! Sarcasm and irony detection from contextual character-level word
//! representations: tokenization, corpus handling, a small neural network
//! core, a biLM encoder, a BiLSTM classifier, training and evaluation.

pub mod classifier;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod nn;
pub mod reference;
pub mod text;
pub mod train;

pub use classifier::{ClassifierConfig, ClassifierModel, Prediction};
pub use config::RunConfig;
pub use corpus::{Dataset, Example, Label, SarcPair, Split};
pub use encoder::{EncoderConfig, EncoderModel, MixMode};
pub use error::{Error, ErrorClass, Result};
pub use eval::{compute_metrics, ensemble_vote, sarc_paired_accuracy, Averaging, Metrics, PairedResult};
pub use text::{tokenize, Token, TokenizerConfig};
pub use train::{train, train_ensemble, TrainConfig, TrainState};
