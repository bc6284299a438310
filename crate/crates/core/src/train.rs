//! Mini-batch training, evaluation, the consensus accuracy metric, and
//! finite-difference gradient verification.
//!
//! Training is deterministic given the config seed: shuffling and dropout
//! draw from dedicated RNG streams, batches pad to their own longest
//! sentence, and gradient accumulation runs in fixed index order.

#[allow(unused_imports)] // required in no_std builds, redundant when std is linked for tests
use num_traits::Float as _;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::LabeledQuestion;
use crate::error::{Error, Result};
use crate::extractor::{EncodedQuestion, Extractor};
use crate::head::Classifier;
use crate::ops::{dropout_backward, dropout_forward, softmax_cross_entropy};
use crate::real::{real, to_f64, Real};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::vocab::{tokenize, CharVocab, WordVocab};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
            dropout_rate: 0.5,
            seed: 0,
            optimizer: OptimizerKind::adam_default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed: a zero step is the cheapest determinism probe
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidRate(format!(
                "dropout_rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainRun {
    pub history: Vec<EpochMetrics>,
}

/// Wall-clock source; the core crate has no clock of its own.
pub trait TimeSource {
    fn now_secs(&self) -> f64;
}

/// Zero clock for contexts that do not care about timing.
pub struct NoTime;

impl TimeSource for NoTime {
    fn now_secs(&self) -> f64 {
        0.0
    }
}

/// Vocabularies needed to encode questions for a given extractor.
#[derive(Clone, Copy)]
pub struct Vocabs<'a> {
    pub word: Option<&'a WordVocab>,
    pub char: Option<&'a CharVocab>,
}

impl<'a> Vocabs<'a> {
    pub fn words_only(word: &'a WordVocab) -> Self {
        Vocabs {
            word: Some(word),
            char: None,
        }
    }
}

/// Encode one tokenized question at the given padding targets.
fn encode_for<F: Real>(
    extractor: &Extractor<F>,
    vocabs: &Vocabs<'_>,
    tokens: &[String],
    word_target: usize,
    word_char_target: usize,
    char_seq_target: usize,
) -> Result<EncodedQuestion> {
    EncodedQuestion::encode(
        tokens,
        extractor.config().variant,
        vocabs.word,
        vocabs.char,
        word_target,
        word_char_target,
        char_seq_target,
    )
}

/// Padding targets for a batch: each batch pads to its own longest sentence.
fn batch_targets(token_lists: &[&Vec<String>]) -> (usize, usize, usize) {
    let word_target = token_lists.iter().map(|t| t.len()).max().unwrap_or(1).max(1);
    let word_char_target = token_lists
        .iter()
        .flat_map(|t| t.iter().map(|w| w.chars().count()))
        .max()
        .unwrap_or(1)
        .max(1);
    let char_seq_target = token_lists
        .iter()
        .map(|t| {
            let words: usize = t.iter().map(|w| w.chars().count()).sum();
            words + t.len().saturating_sub(1)
        })
        .max()
        .unwrap_or(1)
        .max(1);
    (word_target, word_char_target, char_seq_target)
}

struct AdamState<F> {
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
    step: u64,
}

fn adam_update<F: Real>(
    params: &mut [&mut Tensor<F>],
    grads: &[&Tensor<F>],
    state: &mut AdamState<F>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    state.step += 1;
    let b1 = real::<F>(beta1);
    let b2 = real::<F>(beta2);
    let eps = real::<F>(epsilon);
    let corr1 = real::<F>(1.0 - beta1.powi(state.step as i32));
    let corr2 = real::<F>(1.0 - beta2.powi(state.step as i32));
    let lr = real::<F>(lr);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..p.numel() {
            let gi = g.data()[i];
            let mi = b1 * m.data()[i] + (F::one() - b1) * gi;
            let vi = b2 * v.data()[i] + (F::one() - b2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / corr1;
            let v_hat = vi / corr2;
            p.data_mut()[i] = p.data()[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

fn sgd_update<F: Real>(params: &mut [&mut Tensor<F>], grads: &[&Tensor<F>], lr: f64) {
    let lr = real::<F>(lr);
    for (p, g) in params.iter_mut().zip(grads) {
        p.axpy(-lr, g);
    }
}

fn argmax_lowest_tie<F: Real>(logits: &Tensor<F>) -> usize {
    let mut best = 0;
    for i in 1..logits.numel() {
        if logits.data()[i] > logits.data()[best] {
            best = i;
        }
    }
    best
}

/// Train extractor + head in place; returns the per-epoch history.
#[allow(clippy::too_many_arguments)]
pub fn train<F: Real>(
    extractor: &mut Extractor<F>,
    head: &mut Classifier<F>,
    train_set: &[LabeledQuestion],
    val_set: Option<&[LabeledQuestion]>,
    vocabs: &Vocabs<'_>,
    config: &TrainConfig,
    time: &dyn TimeSource,
    mut on_epoch: impl FnMut(usize, &EpochMetrics),
) -> Result<TrainRun> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = head.num_classes();
    for q in train_set.iter().chain(val_set.unwrap_or(&[])) {
        if q.label >= classes {
            return Err(Error::LabelOutOfRange {
                label: q.label,
                classes,
            });
        }
    }
    let token_lists: Vec<Vec<String>> = train_set.iter().map(|q| tokenize(&q.text)).collect();

    let mut root = Rng::new(config.seed);
    let mut shuffle_rng = root.fork(1);
    let mut dropout_rng = root.fork(2);

    let mut adam = AdamState {
        m: extractor
            .params()
            .iter()
            .map(|p| Tensor::zeros(p.tensor.shape()))
            .chain([
                Tensor::zeros(head.weights().shape()),
                Tensor::zeros(head.bias().shape()),
            ])
            .collect(),
        v: extractor
            .params()
            .iter()
            .map(|p| Tensor::zeros(p.tensor.shape()))
            .chain([
                Tensor::zeros(head.weights().shape()),
                Tensor::zeros(head.bias().shape()),
            ])
            .collect(),
        step: 0,
    };

    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        let started = time.now_secs();
        shuffle_rng.shuffle(&mut order);
        let mut total_loss = 0.0f64;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let tokens: Vec<&Vec<String>> = batch.iter().map(|&i| &token_lists[i]).collect();
            let (wt, wct, cst) = batch_targets(&tokens);
            let mut batch_grads = extractor.new_grads();
            let mut head_gw = Tensor::zeros(head.weights().shape());
            let mut head_gb = Tensor::zeros(head.bias().shape());
            let inv_batch = real::<F>(1.0 / batch.len() as f64);
            for (&i, toks) in batch.iter().zip(&tokens) {
                let q = encode_for(extractor, vocabs, toks, wt, wct, cst)?;
                let (rep, cache) = extractor.extract_with_cache(&q)?;
                let (dropped, keep) =
                    dropout_forward(&rep, config.dropout_rate, &mut dropout_rng, true)?;
                let logits = head.forward(&dropped)?;
                let (loss, grad_logits) = softmax_cross_entropy(&logits, train_set[i].label)?;
                total_loss += to_f64(loss);
                if argmax_lowest_tie(&logits) == train_set[i].label {
                    correct += 1;
                }
                let (grad_rep_dropped, gw, gb) = head.backward(&grad_logits, &dropped)?;
                head_gw.axpy(inv_batch, &gw);
                head_gb.axpy(inv_batch, &gb);
                let grad_rep = dropout_backward(&grad_rep_dropped, &keep, config.dropout_rate)?;
                let grads = extractor.extract_backward(&q, &cache, &grad_rep)?;
                batch_grads.add_scaled(&grads, inv_batch);
            }
            batch_grads.respect_frozen(extractor.params());

            let mut params: Vec<&mut Tensor<F>> = extractor
                .params_mut()
                .iter_mut()
                .map(|p| &mut p.tensor)
                .collect();
            let (head_w, head_b) = head.params_mut();
            params.push(head_w);
            params.push(head_b);
            let grads: Vec<&Tensor<F>> = batch_grads
                .tensors
                .iter()
                .chain([&head_gw, &head_gb])
                .collect();
            match config.optimizer {
                OptimizerKind::Sgd => sgd_update(&mut params, &grads, config.learning_rate),
                OptimizerKind::Adam {
                    beta1,
                    beta2,
                    epsilon,
                } => adam_update(
                    &mut params,
                    &grads,
                    &mut adam,
                    config.learning_rate,
                    beta1,
                    beta2,
                    epsilon,
                ),
            }
            extractor.params_mut().enforce_frozen();
        }
        let train_acc = correct as f64 / train_set.len() as f64;
        let loss = total_loss / train_set.len() as f64;
        let val_acc = match val_set {
            Some(vs) => Some(evaluate(extractor, head, vs, vocabs)?),
            None => None,
        };
        let metrics = EpochMetrics {
            loss,
            train_acc,
            val_acc,
            seconds: time.now_secs() - started,
        };
        on_epoch(epoch, &metrics);
        history.push(metrics);
    }
    Ok(TrainRun { history })
}

/// Plain classification accuracy; argmax with ties to the lowest class index.
pub fn evaluate<F: Real>(
    extractor: &Extractor<F>,
    head: &Classifier<F>,
    dataset: &[LabeledQuestion],
    vocabs: &Vocabs<'_>,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for q in dataset {
        if predict(extractor, head, &q.text, vocabs)? == q.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Evaluation-mode class prediction for one question.
pub fn predict<F: Real>(
    extractor: &Extractor<F>,
    head: &Classifier<F>,
    text: &str,
    vocabs: &Vocabs<'_>,
) -> Result<usize> {
    let tokens = tokenize(text);
    let (wt, wct, cst) = batch_targets(&[&tokens]);
    let q = encode_for(extractor, vocabs, &tokens, wt, wct, cst)?;
    let rep = extractor.extract(&q)?;
    let logits = head.forward(&rep)?;
    Ok(argmax_lowest_tie(&logits))
}

/// Consensus accuracy: `min(matches / 3, 1)` over exactly ten human answers,
/// with lowercase/trim normalization on both sides.
pub fn vqa_consensus_accuracy(predicted: &str, ground_truths: &[String]) -> Result<f64> {
    if ground_truths.len() != 10 {
        return Err(Error::GroundTruthCount(ground_truths.len()));
    }
    let norm = |s: &str| s.trim().to_lowercase();
    let p = norm(predicted);
    let matches = ground_truths.iter().filter(|g| norm(g) == p).count();
    Ok((matches as f64 / 3.0).min(1.0))
}

/// One parameter group of a gradient-check report.
#[derive(Debug, Clone)]
pub struct GradCheckGroup {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GradCheckGroup>,
    pub max_rel_error: f64,
    pub pass: bool,
}

impl GradCheckReport {
    /// A model with no parameters trivially passes.
    pub fn empty() -> Self {
        GradCheckReport {
            groups: Vec::new(),
            max_rel_error: 0.0,
            pass: true,
        }
    }
}

fn loss_of<F: Real>(
    extractor: &Extractor<F>,
    head: &Classifier<F>,
    q: &EncodedQuestion,
    label: usize,
) -> Result<f64> {
    let rep = extractor.extract(q)?;
    let logits = head.forward(&rep)?;
    let (loss, _) = softmax_cross_entropy(&logits, label)?;
    let loss = to_f64(loss);
    if !loss.is_finite() {
        return Err(Error::NonFinite("grad-check loss".into()));
    }
    Ok(loss)
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compare analytic gradients of extractor + head against central finite
/// differences on one sample. Dropout is off; frozen (PAD) rows are skipped
/// since they are constants by construction. `corrupt` flips the analytic
/// sign as a negative control.
#[allow(clippy::too_many_arguments)]
pub fn grad_check<F: Real>(
    extractor: &mut Extractor<F>,
    head: &mut Classifier<F>,
    q: &EncodedQuestion,
    label: usize,
    epsilon: f64,
    tolerance: f64,
    corrupt: bool,
) -> Result<GradCheckReport> {
    // analytic pass
    let (rep, cache) = extractor.extract_with_cache(q)?;
    let logits = head.forward(&rep)?;
    let (_, grad_logits) = softmax_cross_entropy(&logits, label)?;
    let (grad_rep, head_gw, head_gb) = head.backward(&grad_logits, &rep)?;
    let mut grads = extractor.extract_backward(q, &cache, &grad_rep)?;
    grads.respect_frozen(extractor.params());
    let sign = if corrupt { -1.0 } else { 1.0 };

    let eps = epsilon;
    let mut groups: Vec<GradCheckGroup> = Vec::new();

    // extractor parameters
    for idx in 0..extractor.params().len() {
        let name = extractor.params().param(idx).name.clone();
        let frozen = extractor.params().param(idx).frozen_row;
        let cols = if extractor.params().get(idx).shape().len() >= 2 {
            extractor.params().get(idx).cols()
        } else {
            0
        };
        let numel = extractor.params().get(idx).numel();
        let mut max_err = 0.0f64;
        for e in 0..numel {
            if let Some(row) = frozen {
                if cols > 0 && e / cols == row {
                    continue;
                }
            }
            let orig = extractor.params().get(idx).data()[e];
            extractor.params_mut().get_mut(idx).data_mut()[e] = orig + real::<F>(eps);
            let plus = loss_of(extractor, head, q, label)?;
            extractor.params_mut().get_mut(idx).data_mut()[e] = orig - real::<F>(eps);
            let minus = loss_of(extractor, head, q, label)?;
            extractor.params_mut().get_mut(idx).data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = sign * to_f64(grads.tensors[idx].data()[e]);
            max_err = max_err.max(rel_error(analytic, numeric));
        }
        groups.push(GradCheckGroup {
            name,
            max_rel_error: max_err,
        });
    }

    // head parameters
    for (name, analytic_grad, is_bias) in [
        ("head.w", &head_gw, false),
        ("head.b", &head_gb, true),
    ] {
        let numel = analytic_grad.numel();
        let mut max_err = 0.0f64;
        for e in 0..numel {
            let t = if is_bias { head.bias_mut() } else { head.weights_mut() };
            let orig = t.data()[e];
            t.data_mut()[e] = orig + real::<F>(eps);
            let plus = loss_of(extractor, head, q, label)?;
            let t = if is_bias { head.bias_mut() } else { head.weights_mut() };
            t.data_mut()[e] = orig - real::<F>(eps);
            let minus = loss_of(extractor, head, q, label)?;
            let t = if is_bias { head.bias_mut() } else { head.weights_mut() };
            t.data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = sign * to_f64(analytic_grad.data()[e]);
            max_err = max_err.max(rel_error(analytic, numeric));
        }
        groups.push(GradCheckGroup {
            name: name.to_string(),
            max_rel_error: max_err,
        });
    }

    let max_rel_error = groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        pass: max_rel_error < tolerance,
        max_rel_error,
        groups,
    })
}
