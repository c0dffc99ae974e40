use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use irony_bench::{examples, TWEETS};
use irony_core::classifier::{ClassifierConfig, ClassifierModel};
use irony_core::encoder::{EncoderConfig, EncoderModel};
use irony_core::nn::{GradBuffer, Lstm, ParamStore, Tensor};
use irony_core::text::{tokenize, TokenizerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_tokenize(c: &mut Criterion) {
    let cfg = TokenizerConfig::stripping();
    c.bench_function("tokenize/4 tweets", |b| {
        b.iter(|| {
            for t in TWEETS {
                black_box(tokenize(black_box(t), &cfg));
            }
        })
    });
}

fn bench_lstm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let lstm = Lstm::new(&mut store, "lstm", 64, 64, true, &mut rng).unwrap();
    let data: Vec<f64> = (0..20 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Tensor::from_vec(&[20, 64], data).unwrap();
    let zeros = vec![0.0; 64];
    c.bench_function("lstm/forward T=20 d=64", |b| {
        b.iter(|| black_box(lstm.forward(&store, &x, &zeros, &zeros).unwrap()))
    });
}

fn bench_classifier(c: &mut Criterion) {
    let train = examples(32);
    let corpus: Vec<Vec<&str>> = train.iter().map(|e| e.surfaces()).collect();
    let encoder = EncoderModel::from_corpus(EncoderConfig::default(), &corpus, 1).unwrap();
    let model = ClassifierModel::new(ClassifierConfig::default(), encoder, 2).unwrap();
    let batch: Vec<_> = train.iter().collect();
    c.bench_function("classifier/forward batch=32", |b| {
        b.iter(|| black_box(model.forward_batch(&batch).unwrap()))
    });
    c.bench_function("classifier/forward+backward batch=32", |b| {
        b.iter(|| {
            let mut grads = GradBuffer::for_store(model.params());
            black_box(model.loss_and_grad(&batch, Some((0, 0)), &mut grads).unwrap())
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_tokenize, bench_lstm, bench_classifier
}
criterion_main!(benches);
