//! Mini-batch Adam training with validation-plateau learning-rate decay,
//! early stopping and best-epoch selection.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierConfig, ClassifierModel};
use crate::corpus::{Dataset, Example, Label};
use crate::encoder::EncoderModel;
use crate::nn::{AdamState, GradBuffer, Tensor};
use crate::{Error, Result};

pub const DEFAULT_ENSEMBLE_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    /// Epochs without improvement that trigger one decay.
    pub plateau_patience: usize,
    pub max_epochs: usize,
    /// Epochs without improvement after which training stops.
    pub early_stop_patience: usize,
    /// The learning rate is never decayed below this value.
    pub min_lr: f64,
    /// Global gradient-norm clipping threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.001,
            decay_factor: 0.5,
            plateau_patience: 1,
            max_epochs: 50,
            early_stop_patience: 10,
            min_lr: 1e-6,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    // negated comparisons so that NaN settings are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(Error::Config(format!(
                "decay_factor must be in (0, 1), got {}",
                self.decay_factor
            )));
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::Config("patience values must be at least 1".into()));
        }
        if self.min_lr < 0.0 || self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("min_lr must be ≥ 0 and clip_norm > 0".into()));
        }
        Ok(())
    }
}

/// Learning rate `lr0 · factor^k`, where `k` grows by one each time
/// validation accuracy fails to improve for `patience` consecutive epochs.
/// The plateau counter restarts after every decay. A decay that would take
/// the rate below `min_lr` is skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr0: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub decays: u32,
    pub plateau_epochs: usize,
    pub best: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub decayed: bool,
}

impl PlateauScheduler {
    pub fn new(lr0: f64, factor: f64, patience: usize, min_lr: f64) -> Self {
        PlateauScheduler {
            lr0,
            factor,
            patience,
            min_lr,
            decays: 0,
            plateau_epochs: 0,
            best: None,
        }
    }

    pub fn from_config(cfg: &TrainConfig) -> Self {
        Self::new(cfg.lr0, cfg.decay_factor, cfg.plateau_patience, cfg.min_lr)
    }

    pub fn lr(&self) -> f64 {
        self.lr0 * self.factor.powi(self.decays as i32)
    }

    /// Records one epoch's validation accuracy.
    pub fn observe(&mut self, val_accuracy: f64) -> Observation {
        if self.best.is_none_or(|b| val_accuracy > b) {
            self.best = Some(val_accuracy);
            self.plateau_epochs = 0;
            return Observation {
                improved: true,
                decayed: false,
            };
        }
        self.plateau_epochs += 1;
        let mut decayed = false;
        if self.plateau_epochs >= self.patience {
            self.plateau_epochs = 0;
            if self.lr0 * self.factor.powi(self.decays as i32 + 1) >= self.min_lr {
                self.decays += 1;
                decayed = true;
            }
        }
        Observation {
            improved: false,
            decayed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean train-mode loss over the epoch's batches.
    pub train_loss: f64,
    pub val_accuracy: f64,
    /// Rate used for this epoch's updates.
    pub lr: f64,
    pub improved: bool,
    pub decayed: bool,
    /// Optimizer steps whose gradient norm exceeded the clipping threshold.
    pub clipped_steps: usize,
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub epoch: usize,
    pub current_lr: f64,
    pub decays: u32,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
    pub best_checkpoint: Option<PathBuf>,
    pub epochs_since_improvement: usize,
    pub steps: u64,
    pub log: Vec<EpochRecord>,
}

impl TrainState {
    /// One JSON object per epoch.
    pub fn log_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.log {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.log_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Share of examples whose eval-mode prediction matches the label.
pub fn accuracy(model: &ClassifierModel, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptySplit("evaluation"));
    }
    let mut correct = 0usize;
    for e in examples {
        if model.predict(e)?.label == e.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

fn snapshot(model: &ClassifierModel) -> Vec<Tensor> {
    model.params().iter().map(|p| p.value.clone()).collect()
}

fn restore(model: &mut ClassifierModel, values: Vec<Tensor>) {
    for (p, v) in model.params_mut().iter_mut().zip(values) {
        p.value = v;
    }
}

/// Trains `model` on `data.train`, selecting the epoch with the highest
/// validation accuracy. Returns the model holding the selected parameters.
/// With `checkpoint`, every improvement is also written to that path.
pub fn train(
    mut model: ClassifierModel,
    data: &Dataset,
    cfg: &TrainConfig,
    checkpoint: Option<&Path>,
) -> Result<(ClassifierModel, TrainState)> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if data.valid.is_empty() {
        return Err(Error::EmptySplit("valid"));
    }
    let batch_size = model.config().batch_size;
    let mut sched = PlateauScheduler::from_config(cfg);
    let mut adam = AdamState::new(model.params(), cfg.lr0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = TrainState {
        epoch: 0,
        current_lr: sched.lr(),
        decays: 0,
        best_val_accuracy: 0.0,
        best_epoch: 0,
        best_checkpoint: None,
        epochs_since_improvement: 0,
        steps: 0,
        log: Vec::new(),
    };
    let mut best = snapshot(&model);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let lr = sched.lr();
        adam.learning_rate = lr;
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut clipped_steps = 0usize;
        let mut max_grad_norm: f64 = 0.0;
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &data.train[i]).collect();
            let mut grads = GradBuffer::for_store(model.params());
            let loss = model.loss_and_grad(&batch, Some((cfg.seed, state.steps)), &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: format!("mean batch loss {loss} at step {}", state.steps),
                });
            }
            let params = model.params_mut();
            params.accumulate(&grads);
            let norm = match cfg.clip_norm {
                Some(max) => {
                    let n = params.clip_grad_norm(max);
                    if n > max {
                        clipped_steps += 1;
                    }
                    n
                }
                None => params.grad_norm(),
            };
            max_grad_norm = max_grad_norm.max(norm);
            adam.step(params)?;
            state.steps += 1;
            loss_sum += loss;
            batches += 1;
        }
        let val_accuracy = accuracy(&model, &data.valid)?;
        let obs = sched.observe(val_accuracy);
        if obs.improved {
            best = snapshot(&model);
            state.best_val_accuracy = val_accuracy;
            state.best_epoch = epoch;
            state.epochs_since_improvement = 0;
            if let Some(path) = checkpoint {
                model.save(path)?;
                state.best_checkpoint = Some(path.to_path_buf());
            }
        } else {
            state.epochs_since_improvement += 1;
        }
        state.epoch = epoch;
        state.decays = sched.decays;
        state.current_lr = sched.lr();
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_accuracy,
            lr,
            improved: obs.improved,
            decayed: obs.decayed,
            clipped_steps,
            max_grad_norm,
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, val acc {:.4}, lr {lr:e}{}",
            record.train_loss,
            val_accuracy,
            if obs.decayed { " (decayed)" } else { "" }
        );
        state.log.push(record);
        if state.epochs_since_improvement >= cfg.early_stop_patience {
            log::info!("early stop after {epoch} epochs");
            break;
        }
    }
    restore(&mut model, best);
    Ok((model, state))
}

/// Builds a classifier whose initialization and training both use
/// `cfg.seed`, then trains it.
pub fn train_from_scratch(
    encoder: Arc<EncoderModel>,
    clf: &ClassifierConfig,
    data: &Dataset,
    cfg: &TrainConfig,
    checkpoint: Option<&Path>,
) -> Result<(ClassifierModel, TrainState)> {
    let model = ClassifierModel::with_shared_encoder(clf.clone(), encoder, cfg.seed)?;
    train(model, data, cfg, checkpoint)
}

/// `base, base + 1, …` for `k` members.
pub fn ensemble_seeds(base: u64, k: usize) -> Vec<u64> {
    (0..k as u64).map(|i| base.wrapping_add(i)).collect()
}

/// One independent [`train_from_scratch`] run per seed. Member `i` writes
/// its checkpoint to `out_dir/member-<i>.ck` when `out_dir` is given.
pub fn train_ensemble(
    encoder: Arc<EncoderModel>,
    clf: &ClassifierConfig,
    data: &Dataset,
    cfg: &TrainConfig,
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Vec<(ClassifierModel, TrainState)>> {
    if seeds.is_empty() {
        return Err(Error::Config("an ensemble needs at least one seed".into()));
    }
    let distinct: HashSet<u64> = seeds.iter().copied().collect();
    if distinct.len() != seeds.len() {
        return Err(Error::Config(format!("ensemble seeds must be distinct, got {seeds:?}")));
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| {
            let member_cfg = TrainConfig { seed, ..cfg.clone() };
            let path = out_dir.map(|d| d.join(format!("member-{i}.ck")));
            train_from_scratch(Arc::clone(&encoder), clf, data, &member_cfg, path.as_deref())
        })
        .collect()
}

/// Label counts `(negatives, positives)` of a split; handy for logging.
pub fn label_counts(examples: &[Example]) -> (usize, usize) {
    let pos = examples.iter().filter(|e| e.label == Label::Sarcastic).count();
    (examples.len() - pos, pos)
}
