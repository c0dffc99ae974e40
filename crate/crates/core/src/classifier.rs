//! Sentence classifier: contextual vectors from the frozen encoder, a
//! trainable BiLSTM, max-pooling over time, and a feed-forward head with two
//! hidden ReLU layers and a two-logit output layer.

use std::path::Path;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Example, Label};
use crate::encoder::{EncoderModel, MixMode, ENCODER_PREFIX};
use crate::nn::checkpoint::{self, Checkpoint};
use crate::nn::lstm::BiLstmCache;
use crate::nn::ops::{
    apply_mask, cross_entropy_with_grad, dropout_mask, max_pool_backward, max_pool_time, relu, softmax,
};
use crate::nn::{BiLstm, GradBuffer, Linear, ParamId, ParamStore, Tensor};
use crate::{Error, Result};

pub const CLASSIFIER_PREFIX: &str = "classifier.";

/// Batch sizes searched for the published models.
pub const STANDARD_BATCH_SIZES: [usize; 3] = [16, 32, 64];
/// Dropout range searched for the published models.
pub const STANDARD_DROPOUT: (f64, f64) = (0.1, 0.5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Hidden units per LSTM direction; the pooled vector is twice as wide.
    pub lstm_hidden: usize,
    pub ffn_units: usize,
    /// Shared by the encoder output, the pooled vector and both hidden
    /// layers of the head.
    pub dropout: f64,
    pub batch_size: usize,
    /// Accept dropout and batch size outside the standard search grid.
    pub allow_nonstandard: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            lstm_hidden: 64,
            ffn_units: 32,
            dropout: 0.2,
            batch_size: 32,
            allow_nonstandard: false,
        }
    }
}

impl ClassifierConfig {
    /// 1024 units per direction (2048 concatenated) and 512-unit hidden
    /// layers.
    pub fn full_scale() -> Self {
        ClassifierConfig {
            lstm_hidden: 1024,
            ffn_units: 512,
            ..ClassifierConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lstm_hidden == 0 || self.ffn_units == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "lstm_hidden, ffn_units and batch_size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !self.allow_nonstandard {
            let (lo, hi) = STANDARD_DROPOUT;
            if !(lo..=hi).contains(&self.dropout) {
                return Err(Error::Config(format!(
                    "dropout {} is outside [{lo}, {hi}]; set allow_nonstandard to override",
                    self.dropout
                )));
            }
            if !STANDARD_BATCH_SIZES.contains(&self.batch_size) {
                return Err(Error::Config(format!(
                    "batch_size {} is not one of {STANDARD_BATCH_SIZES:?}; set allow_nonstandard to override",
                    self.batch_size
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ScalarMix {
    scalars: ParamId,
    gamma: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Head {
    mix: Option<ScalarMix>,
    bilstm: BiLstm,
    ffn1: Linear,
    ffn2: Linear,
    out: Linear,
}

#[derive(Debug, Clone)]
pub struct ClassifierModel {
    config: ClassifierConfig,
    params: ParamStore,
    encoder: Arc<EncoderModel>,
    head: Head,
}

/// Label and probability of the sarcastic class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub p_sarcastic: f64,
}

impl Prediction {
    /// Softmax over two logits; exact ties go to label 0.
    pub fn from_logits(logits: &[f64]) -> Prediction {
        let p = softmax(logits);
        let label = if logits[1] > logits[0] {
            Label::Sarcastic
        } else {
            Label::NonSarcastic
        };
        Prediction {
            label,
            p_sarcastic: p[1],
        }
    }
}

struct MixCache {
    inputs: Vec<Tensor>,
    weights: Vec<f64>,
    gamma: f64,
}

struct Cache {
    mix: Option<MixCache>,
    ctx_mask: Option<Vec<f64>>,
    bilstm: BiLstmCache,
    argmax: Vec<usize>,
    steps: usize,
    pooled: Vec<f64>,
    pool_mask: Option<Vec<f64>>,
    z1: Vec<f64>,
    x2: Vec<f64>,
    mask1: Option<Vec<f64>>,
    z2: Vec<f64>,
    x3: Vec<f64>,
    mask2: Option<Vec<f64>>,
}

/// Seed for the dropout stream of one example in one optimizer step.
pub fn dropout_seed(seed: u64, step: u64, example: u64) -> u64 {
    let mut z = seed
        .wrapping_add(step.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(example.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn masked<R: RngCore + ?Sized>(x: &mut [f64], rng: Option<&mut R>, p: f64) -> Option<Vec<f64>> {
    match rng {
        Some(r) if p > 0.0 => {
            let m = dropout_mask(r, x.len(), p);
            apply_mask(x, &m);
            Some(m)
        }
        _ => None,
    }
}

impl ClassifierModel {
    /// Builds a classifier on top of `encoder`, which is frozen here. When
    /// the encoder is configured for a learned scalar mix, the mix weights
    /// (initially uniform, scale 1) are classifier parameters.
    pub fn new(config: ClassifierConfig, mut encoder: EncoderModel, seed: u64) -> Result<Self> {
        encoder.freeze();
        Self::with_shared_encoder(config, Arc::new(encoder), seed)
    }

    /// As [`Self::new`] for an encoder that is already frozen and shared.
    pub fn with_shared_encoder(config: ClassifierConfig, encoder: Arc<EncoderModel>, seed: u64) -> Result<Self> {
        config.validate()?;
        if !encoder.is_frozen() {
            return Err(Error::Config("the encoder must be frozen before it is shared".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mix = match encoder.config().mix_mode {
            MixMode::TopLayer => None,
            MixMode::LearnedScalarMix => Some(ScalarMix {
                scalars: params.add("mix.scalars", Tensor::zeros(&[encoder.n_mix_layers()]), true)?,
                gamma: params.add("mix.gamma", Tensor::vector(vec![1.0]), true)?,
            }),
        };
        let bilstm = BiLstm::new(&mut params, "bilstm", encoder.d_ctx(), config.lstm_hidden, true, &mut rng)?;
        let d_pool = bilstm.d_out();
        let ffn1 = Linear::new(&mut params, "ffn.0", d_pool, config.ffn_units, true, &mut rng)?;
        let ffn2 = Linear::new(&mut params, "ffn.1", config.ffn_units, config.ffn_units, true, &mut rng)?;
        let out = Linear::new(&mut params, "out", config.ffn_units, 2, true, &mut rng)?;
        Ok(ClassifierModel {
            config,
            params,
            encoder,
            head: Head {
                mix,
                bilstm,
                ffn1,
                ffn2,
                out,
            },
        })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn encoder(&self) -> &EncoderModel {
        &self.encoder
    }

    pub fn shared_encoder(&self) -> Arc<EncoderModel> {
        Arc::clone(&self.encoder)
    }

    fn forward_cached<S: AsRef<str>>(&self, words: &[S], mut rng: Option<&mut dyn RngCore>) -> Result<(Vec<f64>, Cache)> {
        let p = self.config.dropout;
        let pass = self.encoder.forward(words, rng.as_deref_mut())?;
        let (mut ctx, mix) = match self.head.mix {
            None => (pass.layers.last().expect("encoder has layers").clone(), None),
            Some(m) => {
                let inputs = self.encoder.mix_inputs(&pass)?;
                let (ctx, weights, gamma) = self.apply_mix(m, &inputs);
                (ctx, Some(MixCache { inputs, weights, gamma }))
            }
        };
        let ctx_mask = masked(ctx.data_mut(), rng.as_deref_mut(), p);
        let (states, bilstm) = self.head.bilstm.forward(&self.params, &ctx)?;
        let steps = states.rows();
        let (mut pooled, argmax) = max_pool_time(&states)?;
        let pool_mask = masked(&mut pooled, rng.as_deref_mut(), p);
        let z1 = self.head.ffn1.forward(&self.params, &pooled)?;
        let mut x2: Vec<f64> = z1.iter().map(|&v| relu(v)).collect();
        let mask1 = masked(&mut x2, rng.as_deref_mut(), p);
        let z2 = self.head.ffn2.forward(&self.params, &x2)?;
        let mut x3: Vec<f64> = z2.iter().map(|&v| relu(v)).collect();
        let mask2 = masked(&mut x3, rng, p);
        let logits = self.head.out.forward(&self.params, &x3)?;
        Ok((
            logits,
            Cache {
                mix,
                ctx_mask,
                bilstm,
                argmax,
                steps,
                pooled,
                pool_mask,
                z1,
                x2,
                mask1,
                z2,
                x3,
                mask2,
            },
        ))
    }

    fn backward(&self, cache: &Cache, dlogits: &[f64], grads: &mut GradBuffer) {
        let h = &self.head;
        let relu_back = |d: &mut [f64], z: &[f64]| {
            for (g, &v) in d.iter_mut().zip(z) {
                if v <= 0.0 {
                    *g = 0.0;
                }
            }
        };
        let mut dx3 = h.out.backward(&self.params, &cache.x3, dlogits, grads);
        if let Some(m) = &cache.mask2 {
            apply_mask(&mut dx3, m);
        }
        relu_back(&mut dx3, &cache.z2);
        let mut dx2 = h.ffn2.backward(&self.params, &cache.x2, &dx3, grads);
        if let Some(m) = &cache.mask1 {
            apply_mask(&mut dx2, m);
        }
        relu_back(&mut dx2, &cache.z1);
        let mut dpool = h.ffn1.backward(&self.params, &cache.pooled, &dx2, grads);
        if let Some(m) = &cache.pool_mask {
            apply_mask(&mut dpool, m);
        }
        let dstates = max_pool_backward(&dpool, &cache.argmax, cache.steps);
        let mut dctx = h.bilstm.backward(&self.params, &cache.bilstm, &dstates, grads);
        // the encoder is frozen, so the input gradient only feeds the mix
        let (Some(mix), Some(m)) = (&cache.mix, h.mix) else {
            return;
        };
        if let Some(mask) = &cache.ctx_mask {
            apply_mask(dctx.data_mut(), mask);
        }
        let dot: Vec<f64> = mix
            .inputs
            .iter()
            .map(|l| l.data().iter().zip(dctx.data()).map(|(a, b)| a * b).sum())
            .collect();
        let mixed: f64 = mix.weights.iter().zip(&dot).map(|(w, d)| w * d).sum();
        grads.slot(m.gamma)[0] += mixed;
        let ds: Vec<f64> = dot.iter().map(|d| mix.gamma * d).collect();
        let s_ds: f64 = mix.weights.iter().zip(&ds).map(|(w, d)| w * d).sum();
        for ((g, w), d) in grads.slot(m.scalars).iter_mut().zip(&mix.weights).zip(&ds) {
            *g += w * (d - s_ds);
        }
    }

    /// Logits for one example. `rng` switches on every dropout (encoder and
    /// head); `None` is eval mode.
    pub fn forward(&self, example: &Example, rng: Option<&mut dyn RngCore>) -> Result<Vec<f64>> {
        Ok(self.forward_cached(&example.surfaces(), rng)?.0)
    }

    /// Eval-mode logits for a batch. The contextual vectors of the batch are
    /// right-padded to the longest example and the padded BiLSTM states are
    /// set to −∞ before pooling. Each direction runs over the example's own
    /// length, so padding never reaches the real positions.
    pub fn forward_batch(&self, batch: &[&Example]) -> Result<Vec<Vec<f64>>> {
        let t_max = batch.iter().map(|e| e.len()).max().unwrap_or(0);
        let d = self.head.bilstm.d_out();
        let mut out = Vec::with_capacity(batch.len());
        for e in batch {
            let words = e.surfaces();
            if words.is_empty() {
                return Err(Error::ShapeMismatch(format!("example {:?} has no tokens", e.id)));
            }
            let ctx = self.mix_context(&words)?;
            let (states, _) = self.head.bilstm.forward(&self.params, &ctx)?;
            let mut padded = Tensor::filled(&[t_max, d], f64::NEG_INFINITY);
            for t in 0..states.rows() {
                padded.row_mut(t).copy_from_slice(states.row(t));
            }
            let (pooled, _) = max_pool_time(&padded)?;
            out.push(self.head_logits(&pooled)?);
        }
        Ok(out)
    }

    fn apply_mix(&self, m: ScalarMix, inputs: &[Tensor]) -> (Tensor, Vec<f64>, f64) {
        let weights = softmax(self.params.value(m.scalars).data());
        let gamma = self.params.value(m.gamma).data()[0];
        let mut ctx = Tensor::zeros(inputs[0].shape());
        for (layer, w) in inputs.iter().zip(&weights) {
            for (o, v) in ctx.data_mut().iter_mut().zip(layer.data()) {
                *o += gamma * w * v;
            }
        }
        (ctx, weights, gamma)
    }

    fn mix_context<S: AsRef<str>>(&self, words: &[S]) -> Result<Tensor> {
        let pass = self.encoder.forward(words, None)?;
        Ok(match self.head.mix {
            None => pass.layers.last().expect("encoder has layers").clone(),
            Some(m) => self.apply_mix(m, &self.encoder.mix_inputs(&pass)?).0,
        })
    }

    fn head_logits(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        let x2: Vec<f64> = self.head.ffn1.forward(&self.params, pooled)?.into_iter().map(relu).collect();
        let x3: Vec<f64> = self.head.ffn2.forward(&self.params, &x2)?.into_iter().map(relu).collect();
        self.head.out.forward(&self.params, &x3)
    }

    pub fn predict(&self, example: &Example) -> Result<Prediction> {
        Ok(Prediction::from_logits(&self.forward(example, None)?))
    }

    /// Mean eval-mode cross-entropy over `batch`.
    pub fn loss(&self, batch: &[&Example]) -> Result<f64> {
        let mut total = 0.0;
        for e in batch {
            let (logits, _) = self.forward_cached(&e.surfaces(), None)?;
            total += crate::nn::ops::cross_entropy(&logits, e.label.index());
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Mean cross-entropy over `batch` with gradients (scaled by `1/B`)
    /// added to `grads`. With `dropout = Some((seed, step))` every example
    /// draws its masks from [`dropout_seed`]`(seed, step, index)`; `None`
    /// disables dropout.
    pub fn loss_and_grad(&self, batch: &[&Example], dropout: Option<(u64, u64)>, grads: &mut GradBuffer) -> Result<f64> {
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut total = 0.0;
        for (i, e) in batch.iter().enumerate() {
            let mut rng = dropout.map(|(seed, step)| ChaCha8Rng::seed_from_u64(dropout_seed(seed, step, i as u64)));
            let (logits, cache) = self.forward_cached(&e.surfaces(), rng.as_mut().map(|r| r as &mut dyn RngCore))?;
            let (loss, mut dlogits) = cross_entropy_with_grad(&logits, e.label.index());
            total += loss;
            dlogits.iter_mut().for_each(|g| *g *= scale);
            self.backward(&cache, &dlogits, grads);
        }
        Ok(total * scale)
    }

    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "classifier",
            "encoder": self.encoder.meta(),
            "classifier": { "config": self.config },
        })
    }

    /// Writes encoder and classifier parameters into one checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::write(
            path,
            &[(ENCODER_PREFIX, self.encoder.params()), (CLASSIFIER_PREFIX, &self.params)],
            &self.meta(),
        )
    }

    pub fn load(path: &Path) -> Result<ClassifierModel> {
        let ck = Checkpoint::read(path)?;
        Self::from_checkpoint(&ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<ClassifierModel> {
        let missing = |k: &str| Error::CorruptCheckpoint(format!("checkpoint metadata lacks {k:?}"));
        if ck.meta.get("kind").and_then(|v| v.as_str()) != Some("classifier") {
            return Err(Error::CorruptCheckpoint("not a classifier checkpoint".into()));
        }
        let enc_meta = ck.meta.get("encoder").ok_or_else(|| missing("encoder"))?;
        let encoder = EncoderModel::from_checkpoint(ck, enc_meta, ENCODER_PREFIX)?;
        let cfg_value = ck
            .meta
            .get("classifier")
            .and_then(|c| c.get("config"))
            .cloned()
            .ok_or_else(|| missing("classifier.config"))?;
        let config: ClassifierConfig = serde_json::from_value(cfg_value)?;
        let mut model = ClassifierModel::new(config, encoder, 0)?;
        ck.load_into(CLASSIFIER_PREFIX, &mut model.params)?;
        for p in model.params.iter_mut() {
            let e = ck
                .entry(&format!("{CLASSIFIER_PREFIX}{}", p.name))
                .expect("load_into checked every entry");
            p.trainable = e.trainable;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use crate::encoder::EncoderConfig;
    use crate::nn::{grad_check, GradCheckOptions};
    use crate::text::{tokenize, TokenizerConfig};

    fn tiny_encoder(mix_mode: MixMode) -> EncoderModel {
        let corpus = vec![vec!["so", "great", "#mondays"], vec!["I", "love", "it"]];
        let cfg = EncoderConfig {
            d_char: 3,
            filters: vec![(1, 2), (2, 2)],
            d_word: 3,
            n_layers: 1,
            d_lm: 3,
            mix_mode,
            dropout: 0.1,
            ..EncoderConfig::default()
        };
        EncoderModel::from_corpus(cfg, &corpus, 4).unwrap()
    }

    fn tiny_config() -> ClassifierConfig {
        ClassifierConfig {
            lstm_hidden: 3,
            ffn_units: 4,
            dropout: 0.2,
            batch_size: 2,
            allow_nonstandard: true,
        }
    }

    fn ex(id: &str, text: &str, label: Label) -> Example {
        Example {
            id: id.into(),
            tokens: tokenize(text, &TokenizerConfig::default()),
            label,
            source: Source::Twitter,
        }
    }

    #[test]
    fn config_grid_is_enforced() {
        assert!(ClassifierConfig::default().validate().is_ok());
        let bad = ClassifierConfig {
            batch_size: 20,
            ..ClassifierConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ClassifierConfig {
            dropout: 0.05,
            ..ClassifierConfig::default()
        };
        assert!(bad.validate().is_err());
        let ok = ClassifierConfig {
            dropout: 0.0,
            batch_size: 20,
            allow_nonstandard: true,
            ..ClassifierConfig::default()
        };
        assert!(ok.validate().is_ok());
        assert_eq!(ClassifierConfig::full_scale().lstm_hidden * 2, 2048);
    }

    #[test]
    fn prediction_rules() {
        let p = Prediction::from_logits(&[0.0, 0.0]);
        assert_eq!((p.label, p.p_sarcastic), (Label::NonSarcastic, 0.5));
        let p = Prediction::from_logits(&[-2.0, 3.0]);
        assert_eq!(p.label, Label::Sarcastic);
        assert!((p.p_sarcastic - 1.0 / (1.0 + (-5.0f64).exp())).abs() < 1e-15);
        assert!((p.p_sarcastic - 0.9933).abs() < 1e-4);
    }

    #[test]
    fn zero_head_gives_zero_logits() {
        let mut m = ClassifierModel::new(tiny_config(), tiny_encoder(MixMode::TopLayer), 1).unwrap();
        m.params_mut().iter_mut().for_each(|p| p.value.fill(0.0));
        let e = ex("a", "so great #mondays", Label::Sarcastic);
        assert_eq!(m.forward(&e, None).unwrap(), vec![0.0, 0.0]);
        assert!(m.encoder().is_frozen());
    }

    #[test]
    fn batch_equals_singles_and_padding_is_inert() {
        let m = ClassifierModel::new(tiny_config(), tiny_encoder(MixMode::TopLayer), 1).unwrap();
        let a = ex("a", "I love it so much !!!", Label::Sarcastic);
        let b = ex("b", "great", Label::NonSarcastic);
        let batch = m.forward_batch(&[&a, &b]).unwrap();
        let swapped = m.forward_batch(&[&b, &a]).unwrap();
        assert_eq!(batch[0], swapped[1]);
        for (e, logits) in [&a, &b].iter().zip(&batch) {
            let single = m.forward(e, None).unwrap();
            for (x, y) in single.iter().zip(logits) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert_eq!(m.forward(&a, None).unwrap(), m.forward(&a, None).unwrap());
    }

    fn check_gradients(mix_mode: MixMode) {
        let mut m = ClassifierModel::new(tiny_config(), tiny_encoder(mix_mode), 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in m.params_mut().iter_mut() {
            let shape = p.value.shape().to_vec();
            p.value = crate::nn::uniform(&mut rng, &shape, 0.8);
        }
        let a = ex("a", "so great #mondays", Label::Sarcastic);
        let b = ex("b", "I love it", Label::NonSarcastic);
        let batch = [&a, &b];
        let mut g = GradBuffer::for_store(m.params());
        m.loss_and_grad(&batch, None, &mut g).unwrap();
        m.params_mut().accumulate(&g);
        let probe = m.clone();
        let report = grad_check(
            m.params_mut(),
            |p| {
                let mut q = probe.clone();
                *q.params_mut() = p.clone();
                q.loss(&batch).unwrap()
            },
            GradCheckOptions::default(),
        );
        assert!(report.checked >= 200, "{report:?}");
        assert!(report.max_rel_error < 1e-4, "{mix_mode:?}: {report:?}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradients(MixMode::TopLayer);
        check_gradients(MixMode::LearnedScalarMix);
    }

    #[test]
    fn dropout_is_seeded_and_only_in_train_mode() {
        let m = ClassifierModel::new(tiny_config(), tiny_encoder(MixMode::TopLayer), 1).unwrap();
        let e = ex("a", "so great #mondays", Label::Sarcastic);
        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            m.forward(&e, Some(&mut r)).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert!((0..8).any(|s| run(s) != run(s + 100)));
    }

    #[test]
    fn checkpoint_round_trip_keeps_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf.ck");
        let mut m = ClassifierModel::new(tiny_config(), tiny_encoder(MixMode::LearnedScalarMix), 1).unwrap();
        m.params_mut().round_to_f32();
        m.save(&path).unwrap();
        let loaded = ClassifierModel::load(&path).unwrap();
        assert!(loaded.encoder().is_frozen());
        assert!(loaded.params().iter().all(|p| p.trainable));
        let e = ex("a", "so great #mondays", Label::Sarcastic);
        assert_eq!(loaded.forward(&e, None).unwrap().len(), 2);
        let before = std::fs::read(&path).unwrap();
        loaded.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), before);
    }
}
