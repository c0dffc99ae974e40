use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{save_encoder, EncoderModel};
use crate::nn::{AdamState, GradBuffer, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Sentences per optimizer step.
    pub batch_size: usize,
    /// Trailing share of the corpus held out for model selection. With no
    /// held-out sentences the training corpus itself is scored.
    pub heldout_fraction: f64,
    pub seed: u64,
    pub clip_norm: Option<f64>,
    /// Where to write the best encoder, if anywhere.
    pub checkpoint: Option<PathBuf>,
}

impl Default for PretrainOptions {
    fn default() -> Self {
        PretrainOptions {
            epochs: 10,
            learning_rate: 0.001,
            batch_size: 16,
            heldout_fraction: 0.1,
            seed: 0,
            clip_norm: Some(5.0),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainEpoch {
    pub epoch: usize,
    /// Running train-mode perplexity over the epoch's batches.
    pub train_perplexity: f64,
    /// Eval-mode perplexity on the selection set after the epoch.
    pub selection_perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainLog {
    pub vocab_size: usize,
    pub train_sentences: usize,
    pub heldout_sentences: usize,
    /// Eval-mode selection perplexity before any update (epoch 0).
    pub initial_perplexity: f64,
    pub epochs: Vec<PretrainEpoch>,
    /// 0 when no epoch improved on the initial parameters.
    pub best_epoch: usize,
    pub best_perplexity: f64,
}

/// Trains the forward and backward language models jointly on `corpus`
/// (summed cross-entropy, averaged per prediction within a batch) and leaves
/// `model` holding the parameters of the best epoch by selection perplexity.
pub fn pretrain_lm<S: AsRef<str>>(
    corpus: &[Vec<S>],
    model: &mut EncoderModel,
    opts: &PretrainOptions,
) -> Result<PretrainLog> {
    if opts.batch_size == 0 || opts.learning_rate <= 0.0 || !(0.0..1.0).contains(&opts.heldout_fraction) {
        return Err(Error::Config(format!(
            "pretraining needs batch_size ≥ 1, learning_rate > 0 and heldout_fraction in [0, 1), got {opts:?}"
        )));
    }
    let usable: Vec<&[S]> = corpus.iter().filter(|s| s.len() >= 2).map(Vec::as_slice).collect();
    if usable.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_held = if usable.len() >= 2 {
        ((usable.len() as f64) * opts.heldout_fraction).ceil() as usize
    } else {
        0
    }
    .min(usable.len() - 1);
    let (train, heldout) = usable.split_at(usable.len() - n_held);
    let selection: Vec<&[S]> = if heldout.is_empty() { train.to_vec() } else { heldout.to_vec() };
    let score = |m: &EncoderModel| -> Result<f64> {
        let sents: Vec<Vec<&str>> = selection
            .iter()
            .map(|s| s.iter().map(AsRef::as_ref).collect())
            .collect();
        m.perplexity(&sents)
    };

    model.params_mut().set_trainable(true);
    let mut adam = AdamState::new(model.params(), opts.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let initial = score(model)?;
    let mut best = (0usize, initial, snapshot(model));
    let mut log = PretrainLog {
        vocab_size: model.word_vocab().len(),
        train_sentences: train.len(),
        heldout_sentences: heldout.len(),
        initial_perplexity: initial,
        epochs: Vec::with_capacity(opts.epochs),
        best_epoch: 0,
        best_perplexity: initial,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        let (mut nll, mut count) = (0.0, 0usize);
        for (b, batch) in order.chunks(opts.batch_size).enumerate() {
            let mut grads = GradBuffer::for_store(model.params());
            let (mut batch_nll, mut batch_count) = (0.0, 0usize);
            for &i in batch {
                let sent = train[i];
                let pass = model.forward(sent, Some(&mut rng))?;
                let (l, c) = model.lm_loss(&model.word_ids(sent), &pass, Some(&mut grads));
                batch_nll += l;
                batch_count += c;
            }
            if !batch_nll.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: format!("language-model loss {batch_nll}"),
                });
            }
            grads.scale(1.0 / batch_count as f64);
            let params = model.params_mut();
            params.accumulate(&grads);
            if let Some(max) = opts.clip_norm {
                params.clip_grad_norm(max);
            }
            adam.step(params)?;
            nll += batch_nll;
            count += batch_count;
        }
        let selection_perplexity = score(model)?;
        log::info!("pretrain epoch {epoch}: selection perplexity {selection_perplexity:.4}");
        log.epochs.push(PretrainEpoch {
            epoch,
            train_perplexity: (nll / count as f64).exp(),
            selection_perplexity,
        });
        if selection_perplexity < best.1 {
            best = (epoch, selection_perplexity, snapshot(model));
        }
    }
    restore(model, best.2);
    log.best_epoch = best.0;
    log.best_perplexity = best.1;
    if let Some(path) = &opts.checkpoint {
        save_encoder(model, path)?;
    }
    Ok(log)
}

fn snapshot(model: &EncoderModel) -> Vec<Tensor> {
    model.params().iter().map(|p| p.value.clone()).collect()
}

fn restore(model: &mut EncoderModel, values: Vec<Tensor>) {
    for (p, v) in model.params_mut().iter_mut().zip(values) {
        p.value = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::tests::tiny_config;
    use crate::encoder::{CharVocab, WordVocab};

    #[test]
    fn training_reduces_heldout_perplexity() {
        let base = ["the cat sat on the mat", "a dog sat on the rug", "the dog ran to the cat"];
        let corpus: Vec<Vec<&str>> = base
            .iter()
            .cycle()
            .take(30)
            .map(|s| s.split(' ').collect())
            .collect();
        let mut m = EncoderModel::from_corpus(tiny_config(), &corpus, 1).unwrap();
        let opts = PretrainOptions {
            epochs: 8,
            learning_rate: 0.01,
            batch_size: 4,
            heldout_fraction: 0.2,
            ..PretrainOptions::default()
        };
        let log = pretrain_lm(&corpus, &mut m, &opts).unwrap();
        assert_eq!(log.heldout_sentences, 6);
        assert!((log.initial_perplexity - log.vocab_size as f64).abs() < 1e-9);
        assert!(log.best_epoch > 0);
        assert!(log.best_perplexity < log.initial_perplexity);
    }

    #[test]
    fn perplexity_is_invariant_under_vocab_relabeling() {
        let corpus: Vec<Vec<&str>> = vec![vec!["x", "y", "z", "x"], vec!["z", "y", "x"]];
        let mut a = EncoderModel::from_corpus(tiny_config(), &corpus, 2).unwrap();
        let opts = PretrainOptions {
            epochs: 3,
            learning_rate: 0.05,
            heldout_fraction: 0.0,
            ..PretrainOptions::default()
        };
        pretrain_lm(&corpus, &mut a, &opts).unwrap();
        let words: Vec<String> = (1..a.word_vocab().len()).map(|i| a.word_vocab().word(i).to_string()).collect();
        let permuted: Vec<String> = words.iter().rev().cloned().collect();
        let mut b = EncoderModel::new(
            a.config().clone(),
            CharVocab::from(Vec::<char>::from(a.char_vocab().clone())),
            WordVocab::from_words(permuted),
            99,
        )
        .unwrap();
        for (pb, pa) in b.params_mut().iter_mut().zip(a.params().iter()) {
            pb.value = pa.value.clone();
        }
        // move softmax rows to the relabeled positions
        let wa = a.params().id("lm.softmax.weight").unwrap();
        let ba = a.params().id("lm.softmax.bias").unwrap();
        for id in 0..a.word_vocab().len() {
            let nb = b.word_vocab().id(a.word_vocab().word(id));
            let row = a.params().value(wa).row(id).to_vec();
            b.params_mut().value_mut(wa).row_mut(nb).copy_from_slice(&row);
            let bias = a.params().value(ba).data()[id];
            b.params_mut().value_mut(ba).data_mut()[nb] = bias;
        }
        let pa = a.perplexity(&corpus).unwrap();
        let pb = b.perplexity(&corpus).unwrap();
        assert!((pa - pb).abs() < 1e-12, "{pa} vs {pb}");
        assert!(pa < a.word_vocab().len() as f64);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let corpus: Vec<Vec<&str>> = vec![vec!["lonely"]];
        let mut m = EncoderModel::from_corpus(tiny_config(), &corpus, 0).unwrap();
        assert!(matches!(
            pretrain_lm(&corpus, &mut m, &PretrainOptions::default()),
            Err(Error::EmptyCorpus)
        ));
    }
}
