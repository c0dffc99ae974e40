use std::sync::Arc;

use irony_core::classifier::{ClassifierConfig, ClassifierModel};
use irony_core::corpus::{Dataset, Example, Label, Source};
use irony_core::encoder::{EncoderConfig, EncoderModel};
use irony_core::text::{Token, TokenKind};
use irony_core::train::{self, TrainConfig};
use irony_core::Error;

const WORDS: [&str; 10] = ["the", "day", "bus", "work", "coffee", "rain", "meeting", "traffic", "phone", "food"];

fn split(n: usize, offset: usize) -> Vec<Example> {
    (0..n)
        .map(|i| {
            let j = i + offset;
            let label = if j % 2 == 0 { Label::Sarcastic } else { Label::NonSarcastic };
            let mut words: Vec<&str> = (0..3 + j % 3).map(|k| WORDS[(j * 3 + k) % WORDS.len()]).collect();
            if label == Label::Sarcastic {
                words.push("#fail");
            }
            Example {
                id: format!("e{j}"),
                tokens: words.iter().map(|w| Token::new(*w, TokenKind::Word)).collect(),
                label,
                source: Source::Twitter,
            }
        })
        .collect()
}

fn dataset() -> Dataset {
    Dataset {
        name: "tiny".into(),
        train: split(24, 0),
        valid: split(8, 100),
        test: split(8, 200),
        ..Dataset::default()
    }
}

fn encoder(data: &Dataset) -> Arc<EncoderModel> {
    let cfg = EncoderConfig {
        d_char: 6,
        filters: vec![(1, 4), (2, 4)],
        d_word: 8,
        n_layers: 1,
        d_lm: 8,
        ..EncoderConfig::default()
    };
    let sentences: Vec<Vec<String>> = data.train.iter().map(|e| e.surfaces().iter().map(|s| s.to_string()).collect()).collect();
    let mut enc = EncoderModel::from_corpus(cfg, &sentences, 1).unwrap();
    enc.freeze();
    Arc::new(enc)
}

fn clf() -> ClassifierConfig {
    ClassifierConfig {
        lstm_hidden: 6,
        ffn_units: 6,
        batch_size: 16,
        ..ClassifierConfig::default()
    }
}

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        max_epochs: 5,
        seed,
        ..TrainConfig::default()
    }
}

fn flat(m: &ClassifierModel) -> Vec<u64> {
    m.params().iter().flat_map(|p| p.value.data().iter().map(|v| v.to_bits())).collect()
}

#[test]
fn same_seed_runs_are_bit_identical() {
    let data = dataset();
    let enc = encoder(&data);
    let (a, sa) = train::train_from_scratch(enc.clone(), &clf(), &data, &cfg(4), None).unwrap();
    let (b, sb) = train::train_from_scratch(enc, &clf(), &data, &cfg(4), None).unwrap();
    assert_eq!(sa.log_jsonl(), sb.log_jsonl());
    assert_eq!(flat(&a), flat(&b));
}

#[test]
fn returned_model_attains_the_best_logged_accuracy() {
    let data = dataset();
    let (model, state) = train::train_from_scratch(encoder(&data), &clf(), &data, &cfg(5), None).unwrap();
    let best = state.log.iter().map(|r| r.val_accuracy).fold(f64::MIN, f64::max);
    assert_eq!(state.best_val_accuracy, best);
    assert_eq!(train::accuracy(&model, &data.valid).unwrap(), best);
    for r in &state.log {
        assert_eq!(r.lr, 0.001 * 0.5f64.powi(state.log.iter().take_while(|x| x.epoch < r.epoch).filter(|x| x.decayed).count() as i32));
    }
}

#[test]
fn ensemble_of_one_matches_a_single_run_and_members_differ() {
    let data = dataset();
    let enc = encoder(&data);
    let (single, _) = train::train_from_scratch(enc.clone(), &clf(), &data, &cfg(9), None).unwrap();
    let one = train::train_ensemble(enc.clone(), &clf(), &data, &cfg(9), &[9], None).unwrap();
    assert_eq!(flat(&one[0].0), flat(&single));

    let dir = tempfile::tempdir().unwrap();
    let three = train::train_ensemble(enc.clone(), &clf(), &data, &cfg(0), &train::ensemble_seeds(20, 3), Some(dir.path())).unwrap();
    let files: Vec<Vec<u8>> = (0..3).map(|i| std::fs::read(dir.path().join(format!("member-{i}.ck"))).unwrap()).collect();
    for i in 0..3 {
        for j in i + 1..3 {
            assert_ne!(files[i], files[j]);
            assert_ne!(flat(&three[i].0), flat(&three[j].0));
        }
    }
    assert_eq!(train::DEFAULT_ENSEMBLE_SIZE, 10);
    assert!(train::train_ensemble(enc, &clf(), &data, &cfg(0), &[1, 1], None).is_err());
}

#[test]
fn empty_splits_are_rejected() {
    let mut data = dataset();
    let enc = encoder(&data);
    data.valid.clear();
    let err = train::train_from_scratch(enc, &clf(), &data, &cfg(1), None).unwrap_err();
    assert!(matches!(err, Error::EmptySplit(_)), "{err}");
}
