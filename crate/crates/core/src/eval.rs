//! Classification metrics, the paired-statement accuracy protocol, and
//! majority voting over ensemble members.
//!
//! Class 1 (sarcastic) is the positive class. Precision, recall and F1 are
//! 0 whenever their denominator is 0.

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierModel;
use crate::corpus::{Example, Label, PairSide, SarcPair};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    PositiveClass,
    Macro,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts with the roles of the two classes exchanged.
    pub fn flipped(&self) -> Confusion {
        Confusion {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub averaging: Averaging,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// (precision, recall, f1) treating class 1 as positive.
fn positive_prf(c: &Confusion) -> (f64, f64, f64) {
    let p = ratio(c.tp, c.tp + c.fp);
    let r = ratio(c.tp, c.tp + c.fn_);
    (p, r, harmonic(p, r))
}

impl Metrics {
    pub fn from_confusion(c: Confusion, averaging: Averaging) -> Metrics {
        let (precision, recall, f1) = match averaging {
            Averaging::PositiveClass => positive_prf(&c),
            Averaging::Macro => {
                let (p1, r1, f1) = positive_prf(&c);
                let (p0, r0, f0) = positive_prf(&c.flipped());
                ((p0 + p1) / 2.0, (r0 + r1) / 2.0, (f0 + f1) / 2.0)
            }
        };
        Metrics {
            accuracy: ratio(c.tp + c.tn, c.total()),
            precision,
            recall,
            f1,
            confusion: c,
            averaging,
        }
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<Confusion> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptySplit("evaluation"));
    }
    let mut c = Confusion::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (Label::Sarcastic, Label::Sarcastic) => c.tp += 1,
            (Label::Sarcastic, Label::NonSarcastic) => c.fp += 1,
            (Label::NonSarcastic, Label::Sarcastic) => c.fn_ += 1,
            (Label::NonSarcastic, Label::NonSarcastic) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn compute_metrics(predictions: &[Label], labels: &[Label], averaging: Averaging) -> Result<Metrics> {
    Ok(Metrics::from_confusion(confusion(predictions, labels)?, averaging))
}

/// Both averaging conventions side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub positive_class: Metrics,
    pub macro_avg: Metrics,
}

pub fn metrics_report(predictions: &[Label], labels: &[Label]) -> Result<MetricsReport> {
    let c = confusion(predictions, labels)?;
    Ok(MetricsReport {
        n: c.total(),
        positive_class: Metrics::from_confusion(c, Averaging::PositiveClass),
        macro_avg: Metrics::from_confusion(c, Averaging::Macro),
    })
}

/// Anything that assigns a sarcasm probability to a single statement.
pub trait SarcasmScorer {
    fn p_sarcastic(&self, example: &Example) -> Result<f64>;
}

impl<F: Fn(&Example) -> f64> SarcasmScorer for F {
    fn p_sarcastic(&self, example: &Example) -> Result<f64> {
        Ok(self(example))
    }
}

impl SarcasmScorer for ClassifierModel {
    fn p_sarcastic(&self, example: &Example) -> Result<f64> {
        Ok(self.predict(example)?.p_sarcastic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedResult {
    pub n_pairs: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

/// Picks the statement with the higher probability in each pair. A pair
/// whose two probabilities are equal counts as wrong.
pub fn sarc_paired_accuracy<S: SarcasmScorer + ?Sized>(pairs: &[SarcPair], scorer: &S) -> Result<PairedResult> {
    if pairs.is_empty() {
        return Err(Error::EmptySplit("pairs"));
    }
    let mut n_correct = 0;
    for pair in pairs {
        let pa = scorer.p_sarcastic(&pair.statement_a)?;
        let pb = scorer.p_sarcastic(&pair.statement_b)?;
        let choice = if pa > pb {
            Some(PairSide::A)
        } else if pb > pa {
            Some(PairSide::B)
        } else {
            None
        };
        if choice == Some(pair.sarcastic_index) {
            n_correct += 1;
        }
    }
    Ok(PairedResult {
        n_pairs: pairs.len(),
        n_correct,
        accuracy: n_correct as f64 / pairs.len() as f64,
    })
}

/// Per-example majority label over `k` members. A split vote goes to 1 when
/// the members' mean sarcasm probability is at least 0.5, and to 0 when no
/// probabilities are supplied.
pub fn ensemble_vote(per_model: &[Vec<Label>], probabilities: Option<&[Vec<f64>]>) -> Result<Vec<Label>> {
    let Some(first) = per_model.first() else {
        return Err(Error::Config("ensemble vote needs at least one member".into()));
    };
    let n = first.len();
    if let Some(bad) = per_model.iter().find(|m| m.len() != n) {
        return Err(Error::LengthMismatch(format!(
            "member predictions have lengths {n} and {}",
            bad.len()
        )));
    }
    if let Some(probs) = probabilities {
        if probs.len() != per_model.len() || probs.iter().any(|p| p.len() != n) {
            return Err(Error::LengthMismatch(
                "probabilities must match the members' predictions in shape".into(),
            ));
        }
    }
    let k = per_model.len();
    Ok((0..n)
        .map(|i| {
            let ones = per_model.iter().filter(|m| m[i] == Label::Sarcastic).count();
            match (2 * ones).cmp(&k) {
                std::cmp::Ordering::Greater => Label::Sarcastic,
                std::cmp::Ordering::Less => Label::NonSarcastic,
                std::cmp::Ordering::Equal => match probabilities {
                    Some(probs) => {
                        let mean = probs.iter().map(|p| p[i]).sum::<f64>() / k as f64;
                        if mean >= 0.5 {
                            Label::Sarcastic
                        } else {
                            Label::NonSarcastic
                        }
                    }
                    None => Label::NonSarcastic,
                },
            }
        })
        .collect())
}
