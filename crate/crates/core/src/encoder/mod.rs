//! Character-level word encoder and bidirectional LSTM language model that
//! produce contextual word vectors for the classifier.
//!
//! Each word is embedded character by character (`BOW c_1 .. c_n EOW`),
//! passed through a bank of convolution filters with max-over-time, an
//! optional highway layer, and a linear projection to `d_word`. Two LSTM
//! stacks of `n_layers` each then run over the word vectors, one left to
//! right and one right to left. Keeping the directions in separate stacks
//! means the forward language model never sees tokens to its right. Layer
//! `l ≥ 1` of the encoder output is `[fwd_l ; bwd_l]` of width `2·d_lm`.

mod pretrain;
pub mod vocab;

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::checkpoint::{self, Checkpoint};
use crate::nn::layers::{embed, embed_backward, embedding_table, CharConvCache, HighwayCache};
use crate::nn::lstm::LstmCache;
use crate::nn::ops::{apply_mask, cross_entropy_with_grad, dropout_mask};
use crate::nn::{CharConv, GradBuffer, Highway, Linear, Lstm, ParamId, ParamStore, Tensor};
use crate::{Error, Result};

pub use pretrain::{pretrain_lm, PretrainEpoch, PretrainLog, PretrainOptions};
pub use vocab::{CharVocab, WordVocab};

/// Which encoder layers feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    /// The top biLM layer only.
    #[default]
    TopLayer,
    /// `γ · Σ_j softmax(s)_j · L_j` over the character layer and every biLM
    /// layer, with `s` and `γ` trained by the classifier.
    LearnedScalarMix,
}

impl std::str::FromStr for MixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top_layer" => Ok(MixMode::TopLayer),
            "learned_scalar_mix" => Ok(MixMode::LearnedScalarMix),
            other => Err(Error::Config(format!(
                "mix_mode must be top_layer or learned_scalar_mix, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub d_char: usize,
    /// `(width, count)` per filter group.
    pub filters: Vec<(usize, usize)>,
    pub d_word: usize,
    pub n_layers: usize,
    /// Hidden width of each LSTM direction.
    pub d_lm: usize,
    pub mix_mode: MixMode,
    pub highway: bool,
    /// Dropout on the input of every biLM layer. Recurrent connections are
    /// never dropped.
    pub dropout: f64,
    pub max_word_chars: usize,
    /// Size of the language-model output vocabulary, not counting `<unk>`.
    pub lm_vocab_cap: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_char: 16,
            filters: vec![(1, 8), (2, 8), (3, 16)],
            d_word: 64,
            n_layers: 2,
            d_lm: 64,
            mix_mode: MixMode::TopLayer,
            highway: false,
            dropout: 0.1,
            max_word_chars: 50,
            lm_vocab_cap: 10_000,
        }
    }
}

impl EncoderConfig {
    /// Dimensions of the full-size model: 1024-wide word and contextual
    /// vectors from 512 units per LSTM direction.
    pub fn full_scale() -> Self {
        EncoderConfig {
            filters: vec![
                (1, 32),
                (2, 32),
                (3, 64),
                (4, 128),
                (5, 256),
                (6, 512),
                (7, 1024),
            ],
            d_word: 1024,
            d_lm: 512,
            highway: true,
            lm_vocab_cap: 100_000,
            ..EncoderConfig::default()
        }
    }

    pub fn n_filters(&self) -> usize {
        self.filters.iter().map(|&(_, n)| n).sum()
    }

    /// Width of the contextual vectors handed to the classifier.
    pub fn d_ctx(&self) -> usize {
        2 * self.d_lm
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_filters() == 0 {
            return fail("filter counts must sum to at least 1".into());
        }
        if self.filters.iter().any(|&(w, _)| w == 0) {
            return fail("filter widths must be positive".into());
        }
        for (name, v) in [
            ("d_char", self.d_char),
            ("d_word", self.d_word),
            ("n_layers", self.n_layers),
            ("d_lm", self.d_lm),
            ("max_word_chars", self.max_word_chars),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("encoder dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.mix_mode == MixMode::LearnedScalarMix
            && self.d_word != self.d_lm
            && self.d_word != 2 * self.d_lm
        {
            return fail(format!(
                "learned_scalar_mix needs d_word equal to d_lm or 2·d_lm, got {} and {}",
                self.d_word, self.d_lm
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Layout {
    char_table: ParamId,
    convs: Vec<CharConv>,
    highway: Option<Highway>,
    proj: Linear,
    fwd: Vec<Lstm>,
    bwd: Vec<Lstm>,
    softmax: Linear,
}

#[derive(Debug, Clone)]
pub struct EncoderModel {
    config: EncoderConfig,
    params: ParamStore,
    char_vocab: CharVocab,
    word_vocab: WordVocab,
    layout: Layout,
}

#[derive(Debug, Clone)]
struct WordCache {
    chars: Vec<usize>,
    embeds: Tensor,
    convs: Vec<CharConvCache>,
    pooled: Vec<f64>,
    highway: Option<(HighwayCache, Vec<f64>)>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    mask: Option<Vec<f64>>,
    lstm: LstmCache,
}

/// Result of running the encoder over one sentence.
#[derive(Debug, Clone)]
pub struct EncoderPass {
    /// `layers[0]` holds the `[T × d_word]` word vectors, `layers[l]` the
    /// `[T × 2·d_lm]` states of biLM layer `l`.
    pub layers: Vec<Tensor>,
    words: Vec<WordCache>,
    fwd: Vec<LayerCache>,
    bwd: Vec<LayerCache>,
}

impl EncoderModel {
    /// Fresh parameters drawn from `seed`. Every parameter starts trainable;
    /// the language-model softmax starts at zero.
    pub fn new(config: EncoderConfig, char_vocab: CharVocab, word_vocab: WordVocab, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let char_table = params.add(
            "char_embed",
            embedding_table(&mut rng, char_vocab.len(), config.d_char),
            true,
        )?;
        // the pad row stays zero so right-padding is inert
        params.value_mut(char_table).row_mut(CharVocab::PAD).fill(0.0);
        let convs = config
            .filters
            .iter()
            .enumerate()
            .map(|(i, &(w, n))| CharConv::new(&mut params, &format!("conv.{i}"), config.d_char, w, n, true, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let n_f = config.n_filters();
        let highway = if config.highway {
            Some(Highway::new(&mut params, "highway", n_f, true, &mut rng)?)
        } else {
            None
        };
        let proj = Linear::new(&mut params, "proj", n_f, config.d_word, true, &mut rng)?;
        let mut fwd = Vec::with_capacity(config.n_layers);
        let mut bwd = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let d_in = if l == 0 { config.d_word } else { config.d_lm };
            fwd.push(Lstm::new(&mut params, &format!("lm.fwd.{l}"), d_in, config.d_lm, true, &mut rng)?);
            bwd.push(Lstm::new(&mut params, &format!("lm.bwd.{l}"), d_in, config.d_lm, true, &mut rng)?);
        }
        let softmax = Linear::zeros(&mut params, "lm.softmax", config.d_lm, word_vocab.len(), true)?;
        Ok(EncoderModel {
            config,
            params,
            char_vocab,
            word_vocab,
            layout: Layout {
                char_table,
                convs,
                highway,
                proj,
                fwd,
                bwd,
                softmax,
            },
        })
    }

    /// Builds both vocabularies from `corpus` and initializes from `seed`.
    pub fn from_corpus<S: AsRef<str>>(config: EncoderConfig, corpus: &[Vec<S>], seed: u64) -> Result<Self> {
        let chars = CharVocab::from_texts(corpus.iter().flatten().map(AsRef::as_ref));
        let words = WordVocab::build(corpus, config.lm_vocab_cap);
        Self::new(config, chars, words, seed)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn char_vocab(&self) -> &CharVocab {
        &self.char_vocab
    }

    pub fn word_vocab(&self) -> &WordVocab {
        &self.word_vocab
    }

    pub fn d_ctx(&self) -> usize {
        self.config.d_ctx()
    }

    pub fn freeze(&mut self) {
        self.params.set_trainable(false);
    }

    pub fn is_frozen(&self) -> bool {
        self.params.all_frozen()
    }

    /// Number of layers a scalar mix runs over (character layer included).
    pub fn n_mix_layers(&self) -> usize {
        self.config.n_layers + 1
    }

    fn word_forward(&self, word: &str) -> (Vec<f64>, WordCache) {
        let l = &self.layout;
        let chars = self.char_vocab.encode_word(word, self.config.max_word_chars);
        let embeds = embed(&self.params, l.char_table, &chars);
        let mut pooled = Vec::with_capacity(self.config.n_filters());
        let mut convs = Vec::with_capacity(l.convs.len());
        for conv in &l.convs {
            let (out, cache) = conv
                .forward(&self.params, &embeds)
                .expect("char embeddings match the filter width");
            pooled.extend_from_slice(&out);
            convs.push(cache);
        }
        let (proj_in, highway) = match &l.highway {
            Some(hw) => {
                let (y, cache) = hw.forward(&self.params, &pooled).expect("highway width");
                (y.clone(), Some((cache, y)))
            }
            None => (pooled.clone(), None),
        };
        let v = l.proj.forward(&self.params, &proj_in).expect("projection width");
        (
            v,
            WordCache {
                chars,
                embeds,
                convs,
                pooled,
                highway,
            },
        )
    }

    fn word_backward(&self, cache: &WordCache, dv: &[f64], grads: &mut GradBuffer) {
        let l = &self.layout;
        let proj_in = cache.highway.as_ref().map_or(&cache.pooled, |(_, y)| y);
        let mut d = l.proj.backward(&self.params, proj_in, dv, grads);
        if let (Some(hw), Some((hc, _))) = (&l.highway, &cache.highway) {
            d = hw.backward(&self.params, &cache.pooled, hc, &d, grads);
        }
        let mut d_embeds = Tensor::zeros(cache.embeds.shape());
        let mut off = 0;
        for (conv, cc) in l.convs.iter().zip(&cache.convs) {
            let dx = conv.backward(&self.params, &cache.embeds, cc, &d[off..off + conv.n_filters], grads);
            d_embeds.add_assign(&dx);
            off += conv.n_filters;
        }
        embed_backward(l.char_table, &cache.chars, &d_embeds, grads);
    }

    /// Context-free word vector of width `d_word`.
    pub fn encode_word(&self, word: &str) -> Vec<f64> {
        self.word_forward(word).0
    }

    fn run_stack<'r>(
        &self,
        stack: &[Lstm],
        input: Tensor,
        mut rng: Option<&mut (dyn RngCore + 'r)>,
    ) -> Result<(Vec<Tensor>, Vec<LayerCache>)> {
        let zeros = vec![0.0; self.config.d_lm];
        let mut outs = Vec::with_capacity(stack.len());
        let mut caches = Vec::with_capacity(stack.len());
        let mut x = input;
        for lstm in stack {
            let mask = match rng.as_deref_mut() {
                Some(r) if self.config.dropout > 0.0 => {
                    let m = dropout_mask(r, x.len(), self.config.dropout);
                    apply_mask(x.data_mut(), &m);
                    Some(m)
                }
                _ => None,
            };
            let out = lstm.forward(&self.params, &x, &zeros, &zeros)?;
            caches.push(LayerCache { mask, lstm: out.cache });
            x = out.hidden;
            outs.push(x.clone());
        }
        Ok((outs, caches))
    }

    /// Runs every layer over `words`. Dropout is applied when `rng` is given
    /// (train mode); `None` is the deterministic eval mode.
    pub fn forward<'r, S: AsRef<str>>(&self, words: &[S], mut rng: Option<&mut (dyn RngCore + 'r)>) -> Result<EncoderPass> {
        if words.is_empty() {
            return Err(Error::ShapeMismatch("cannot encode an empty sentence".into()));
        }
        let (vecs, caches): (Vec<_>, Vec<_>) = words.iter().map(|w| self.word_forward(w.as_ref())).unzip();
        let word_mat = Tensor::from_rows(&vecs)?;
        let (f_outs, f_caches) = self.run_stack(&self.layout.fwd, word_mat.clone(), rng.as_deref_mut())?;
        let (b_outs, b_caches) = self.run_stack(&self.layout.bwd, word_mat.reversed_rows(), rng)?;
        let mut layers = Vec::with_capacity(self.config.n_layers + 1);
        layers.push(word_mat);
        for (f, b) in f_outs.iter().zip(&b_outs) {
            layers.push(Tensor::hconcat(f, &b.reversed_rows())?);
        }
        Ok(EncoderPass {
            layers,
            words: caches,
            fwd: f_caches,
            bwd: b_caches,
        })
    }

    /// The encoder layers at a common width `d_ctx`. The character layer is
    /// duplicated to `[x ; x]` when `d_word == d_lm`.
    pub fn mix_inputs(&self, pass: &EncoderPass) -> Result<Vec<Tensor>> {
        let d_ctx = self.d_ctx();
        let mut out = Vec::with_capacity(pass.layers.len());
        let l0 = &pass.layers[0];
        if l0.cols() == d_ctx {
            out.push(l0.clone());
        } else if 2 * l0.cols() == d_ctx {
            out.push(Tensor::hconcat(l0, l0)?);
        } else {
            return Err(Error::ShapeMismatch(format!(
                "character layer width {} cannot be mixed at width {d_ctx}",
                l0.cols()
            )));
        }
        out.extend(pass.layers[1..].iter().cloned());
        Ok(out)
    }

    /// Eval-mode contextual vectors `[T × d_ctx]`. With the learned scalar mix
    /// the weights here are uniform with unit scale; the classifier owns the
    /// trained weights.
    pub fn contextualize<S: AsRef<str>>(&self, sentence: &[S]) -> Result<Tensor> {
        let pass = self.forward(sentence, None)?;
        match self.config.mix_mode {
            MixMode::TopLayer => Ok(pass.layers.last().expect("at least one layer").clone()),
            MixMode::LearnedScalarMix => {
                let inputs = self.mix_inputs(&pass)?;
                let w = 1.0 / inputs.len() as f64;
                let mut out = Tensor::zeros(inputs[0].shape());
                for layer in &inputs {
                    for (o, v) in out.data_mut().iter_mut().zip(layer.data()) {
                        *o += w * v;
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn word_ids<S: AsRef<str>>(&self, words: &[S]) -> Vec<usize> {
        words.iter().map(|w| self.word_vocab.id(w.as_ref())).collect()
    }

    /// Summed language-model negative log-likelihood over both directions
    /// and the number of predictions. The forward state at `t` predicts word
    /// `t+1`; the backward state at `t` predicts word `t−1`. With `grads`,
    /// backpropagates through the whole encoder.
    pub(crate) fn lm_loss(&self, ids: &[usize], pass: &EncoderPass, mut grads: Option<&mut GradBuffer>) -> (f64, usize) {
        let t_len = ids.len();
        let top = pass.layers.last().expect("at least one layer");
        let d_lm = self.config.d_lm;
        let softmax = &self.layout.softmax;
        let mut d_top = grads.as_ref().map(|_| Tensor::zeros(top.shape()));
        let mut nll = 0.0;
        let mut count = 0;
        for t in 0..t_len {
            let mut targets = Vec::with_capacity(2);
            if t + 1 < t_len {
                targets.push((0, ids[t + 1]));
            }
            if t > 0 {
                targets.push((d_lm, ids[t - 1]));
            }
            for (off, target) in targets {
                let h = &top.row(t)[off..off + d_lm];
                let logits = softmax.forward(&self.params, h).expect("softmax width");
                let (loss, dlogits) = cross_entropy_with_grad(&logits, target);
                nll += loss;
                count += 1;
                if let (Some(g), Some(dt)) = (grads.as_deref_mut(), d_top.as_mut()) {
                    let dh = softmax.backward(&self.params, h, &dlogits, g);
                    for (acc, v) in dt.row_mut(t)[off..off + d_lm].iter_mut().zip(&dh) {
                        *acc += v;
                    }
                }
            }
        }
        if let (Some(g), Some(dt)) = (grads, d_top) {
            self.backward_top(pass, &dt, g);
        }
        (nll, count)
    }

    /// Backpropagates a gradient on the top layer's `[fwd ; bwd]` states down
    /// to the character embeddings.
    fn backward_top(&self, pass: &EncoderPass, d_top: &Tensor, grads: &mut GradBuffer) {
        let (df, db) = d_top.hsplit(self.config.d_lm);
        let dwf = self.backward_stack(&self.layout.fwd, &pass.fwd, df, grads);
        let dwb = self
            .backward_stack(&self.layout.bwd, &pass.bwd, db.reversed_rows(), grads)
            .reversed_rows();
        for (t, cache) in pass.words.iter().enumerate() {
            let dv: Vec<f64> = dwf.row(t).iter().zip(dwb.row(t)).map(|(a, b)| a + b).collect();
            self.word_backward(cache, &dv, grads);
        }
    }

    fn backward_stack(&self, stack: &[Lstm], caches: &[LayerCache], d_out: Tensor, grads: &mut GradBuffer) -> Tensor {
        let mut d = d_out;
        for (lstm, cache) in stack.iter().zip(caches).rev() {
            d = lstm.backward(&self.params, &cache.lstm, &d, grads);
            if let Some(m) = &cache.mask {
                apply_mask(d.data_mut(), m);
            }
        }
        d
    }

    /// Eval-mode perplexity `exp(mean NLL)` over every prediction in the
    /// corpus. Sentences shorter than two tokens contribute nothing.
    pub fn perplexity<S: AsRef<str>>(&self, corpus: &[Vec<S>]) -> Result<f64> {
        let (mut nll, mut count) = (0.0, 0usize);
        for sent in corpus.iter().filter(|s| s.len() >= 2) {
            let pass = self.forward(sent, None)?;
            let (l, c) = self.lm_loss(&self.word_ids(sent), &pass, None);
            nll += l;
            count += c;
        }
        if count == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok((nll / count as f64).exp())
    }

    /// Header metadata needed to rebuild the model around its parameters.
    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "char_vocab": self.char_vocab,
            "word_vocab": self.word_vocab,
        })
    }

    /// Rebuilds an encoder from `meta` (as produced by [`Self::meta`]) and
    /// the `prefix`-named entries of `ck`. The result is frozen.
    pub fn from_checkpoint(ck: &Checkpoint, meta: &serde_json::Value, prefix: &str) -> Result<Self> {
        let field = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| Error::CorruptCheckpoint(format!("encoder metadata lacks {k:?}")))
        };
        let config: EncoderConfig = serde_json::from_value(field("config")?)?;
        let char_vocab: CharVocab = serde_json::from_value(field("char_vocab")?)?;
        let word_vocab: WordVocab = serde_json::from_value(field("word_vocab")?)?;
        let mut model = Self::new(config, char_vocab, word_vocab, 0)?;
        ck.load_into(prefix, &mut model.params)?;
        model.freeze();
        Ok(model)
    }
}

pub const ENCODER_PREFIX: &str = "encoder.";

/// Writes `model` as a frozen encoder, so that loading and saving again
/// reproduces the file byte for byte.
pub fn save_encoder(model: &EncoderModel, path: &Path) -> Result<()> {
    let meta = serde_json::json!({ "kind": "encoder", "encoder": model.meta() });
    let mut params = model.params.clone();
    params.set_trainable(false);
    checkpoint::write(path, &[(ENCODER_PREFIX, &params)], &meta)
}

/// Loads an encoder checkpoint (or the encoder inside a classifier
/// checkpoint). The returned model is frozen.
pub fn load_encoder(path: &Path) -> Result<EncoderModel> {
    let ck = Checkpoint::read(path)?;
    let meta = ck
        .meta
        .get("encoder")
        .cloned()
        .ok_or_else(|| Error::CorruptCheckpoint("no encoder metadata in checkpoint".into()))?;
    EncoderModel::from_checkpoint(&ck, &meta, ENCODER_PREFIX)
}
