//! Command implementations shared by the binary and the integration tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use convtext_core::data::LabeledQuestion;
use convtext_core::extractor::{lstm_param_count, param_count, EncodedQuestion};
use convtext_core::real::Real;
use convtext_core::synth::{generate_synth, SynthSpec};
use convtext_core::train::{
    evaluate, grad_check, predict, train, GradCheckReport, TimeSource, Vocabs,
};
use convtext_core::vocab::tokenize;
use convtext_core::{CharVocab, Classifier, Extractor, ExtractorConfig, Variant, WordVocab};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::Settings;
use crate::error::{Error, Result};
use crate::metrics::MetricsWriter;
use crate::tsv::{load_tsv, save_tsv};
use crate::vocab_io::{load_word_vocab, save_word_vocab};

/// Wall clock measured from process-local start.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl TimeSource for WallClock {
    fn now_secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Build a word vocabulary from a labeled TSV corpus and write it out.
/// Returns the total vocabulary size (reserved lines included).
pub fn build_vocab(data: &Path, out: &Path) -> Result<usize> {
    let records = load_tsv(data)?;
    let corpus: Vec<Vec<String>> = records.iter().map(|q| tokenize(&q.text)).collect();
    let vocab = WordVocab::build(&corpus)?;
    save_word_vocab(out, &vocab)?;
    Ok(vocab.total_size())
}

/// The published per-model figures the `--all-table3` report checks against.
const PUBLISHED_COUNTS: [(Variant, u64); 3] = [
    (Variant::NonInception, 1_845_248),
    (Variant::InceptionWord, 2_152_448),
    (Variant::InceptionGate, 4_304_896),
];

const PUBLISHED_LSTM: u64 = 13_819_904;

/// Parameter-count report. With `all_table3`, prints the four published
/// figures with a MATCH/MISMATCH verdict each; otherwise the count of the
/// requested variant at its published size. Returns `(text, all_match)`.
pub fn params_report(settings: &Settings, all_table3: bool) -> (String, bool) {
    let mut out = String::new();
    let mut all_match = true;
    if all_table3 {
        for (variant, expected) in PUBLISHED_COUNTS {
            let config = ExtractorConfig::published(variant, 3, 48);
            let got = param_count(&config);
            let verdict = if got == expected { "MATCH" } else { "MISMATCH" };
            all_match &= got == expected;
            out.push_str(&format!("{}\t{got}\t{verdict}\n", variant.name()));
        }
        let lstm = lstm_param_count(300, 1024, 2);
        let verdict = if lstm == PUBLISHED_LSTM { "MATCH" } else { "MISMATCH" };
        all_match &= lstm == PUBLISHED_LSTM;
        out.push_str(&format!("lstm-300-1024-2\t{lstm}\t{verdict}\n"));
    } else {
        let config = ExtractorConfig::published(settings.variant, 3, 48);
        out.push_str(&format!("{}\t{}\n", settings.variant.name(), param_count(&config)));
    }
    (out, all_match)
}

/// Gradient-check one variant at reduced size: compare every analytic
/// partial derivative against central finite differences. `corrupt` flips
/// the analytic sign to prove the comparison can fail.
pub fn run_grad_check<F: Real>(settings: &Settings, corrupt: bool) -> Result<GradCheckReport> {
    let sentence = "is the small dog on the striped mat ?";
    let tokens = tokenize(sentence);
    let word_vocab = WordVocab::build(&[tokens.clone()])?;
    let char_vocab = CharVocab::default_config();
    let config = ExtractorConfig::tiny(
        settings.variant,
        word_vocab.total_size(),
        char_vocab.total_size(),
    );
    let mut extractor = Extractor::<F>::build(config, settings.seed)?;
    let mut head = Classifier::<F>::build(extractor.output_dim(), 3, settings.seed + 1);
    let word_target = tokens.len();
    let word_char_target = tokens.iter().map(|w| w.chars().count()).max().unwrap_or(1);
    let char_seq_target = sentence.chars().count();
    let q = EncodedQuestion::encode(
        &tokens,
        settings.variant,
        Some(&word_vocab),
        Some(&char_vocab),
        word_target,
        word_char_target,
        char_seq_target,
    )?;
    Ok(grad_check(&mut extractor, &mut head, &q, 1, 1e-5, 1e-4, corrupt)?)
}

pub struct TrainOutcome {
    pub final_train_acc: f64,
    pub final_val_acc: Option<f64>,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

fn char_vocab_for(variant: Variant) -> Option<CharVocab> {
    if variant.uses_char_sequence() || variant.uses_word_chars() {
        Some(CharVocab::default_config())
    } else {
        None
    }
}

/// Train a model on a labeled TSV corpus. The corpus is split into train and
/// validation parts; the vocabulary comes from `vocab` if given, otherwise it
/// is built from the training split and saved next to the checkpoint.
/// Writes `metrics.tsv`, `model.ckpt` and (if built here) `vocab.txt` into
/// `out_dir`.
pub fn run_train<F: Real>(
    settings: &Settings,
    data: &Path,
    vocab: Option<&Path>,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    let records = load_tsv(data)?;
    let (train_set, val_set) =
        convtext_core::data::split(&records, settings.split, settings.seed)?;
    if train_set.is_empty() {
        return Err(Error::Invalid("training split is empty".into()));
    }
    fs::create_dir_all(out_dir)?;

    let word_vocab = if settings.variant.uses_words() {
        let v = match vocab {
            Some(path) => load_word_vocab(path)?,
            None => {
                let corpus: Vec<Vec<String>> =
                    train_set.iter().map(|q| tokenize(&q.text)).collect();
                let v = WordVocab::build(&corpus)?;
                save_word_vocab(&out_dir.join("vocab.txt"), &v)?;
                v
            }
        };
        Some(v)
    } else {
        None
    };
    let char_vocab = char_vocab_for(settings.variant);

    let config = settings.extractor_config(
        word_vocab.as_ref().map_or(0, |v| v.total_size()),
        char_vocab.as_ref().map_or(0, |v| v.total_size()),
    )?;
    let num_classes = records.iter().map(|q| q.label).max().unwrap_or(0) + 1;
    if num_classes < 2 {
        return Err(Error::Invalid("corpus has fewer than two classes".into()));
    }
    let mut extractor = Extractor::<F>::build(config, settings.seed)?;
    let mut head = Classifier::<F>::build(extractor.output_dim(), num_classes, settings.seed + 1);

    let vocabs = Vocabs {
        word: word_vocab.as_ref(),
        char: char_vocab.as_ref(),
    };
    let metrics_path = out_dir.join("metrics.tsv");
    let mut log = MetricsWriter::create(&metrics_path, settings)?;
    let mut log_err = None;
    let run = train(
        &mut extractor,
        &mut head,
        &train_set,
        if val_set.is_empty() { None } else { Some(&val_set) },
        &vocabs,
        &settings.train_config()?,
        &WallClock::start(),
        |epoch, m| {
            if let Err(e) = log.epoch(epoch, m) {
                log_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = log_err {
        return Err(e);
    }

    let checkpoint_path = out_dir.join("model.ckpt");
    save_checkpoint(&checkpoint_path, settings, &extractor, &head)?;
    let last = run.history.last();
    Ok(TrainOutcome {
        final_train_acc: last.map_or(0.0, |m| m.train_acc),
        final_val_acc: last.and_then(|m| m.val_acc),
        metrics_path,
        checkpoint_path,
    })
}

/// Evaluate a checkpoint on a labeled TSV corpus; returns exact-label
/// accuracy. `threads > 1` splits the dataset across worker threads; the
/// result is identical to the single-threaded pass.
pub fn run_eval<F: Real>(
    checkpoint: &Path,
    vocab: Option<&Path>,
    data: &Path,
    threads: usize,
) -> Result<f64> {
    let (settings, extractor, head) = load_checkpoint::<F>(checkpoint)?;
    let word_vocab = if settings.variant.uses_words() {
        let path = vocab.ok_or_else(|| {
            Error::Invalid("this model needs a word vocabulary (--vocab)".into())
        })?;
        let v = load_word_vocab(path)?;
        if v.total_size() != extractor.config().word_vocab_size {
            return Err(Error::Invalid(format!(
                "vocabulary size {} does not match the checkpoint's {}",
                v.total_size(),
                extractor.config().word_vocab_size
            )));
        }
        Some(v)
    } else {
        None
    };
    let char_vocab = char_vocab_for(settings.variant);
    let vocabs = Vocabs {
        word: word_vocab.as_ref(),
        char: char_vocab.as_ref(),
    };
    let dataset = load_tsv(data)?;
    if threads <= 1 {
        return Ok(evaluate(&extractor, &head, &dataset, &vocabs)?);
    }
    let chunk = dataset.len().div_ceil(threads);
    let correct = std::thread::scope(|scope| -> Result<usize> {
        let mut handles = Vec::new();
        for part in dataset.chunks(chunk) {
            let extractor = &extractor;
            let head = &head;
            let vocabs = &vocabs;
            handles.push(scope.spawn(move || -> Result<usize> {
                let mut correct = 0;
                for q in part {
                    if predict(extractor, head, &q.text, vocabs)? == q.label {
                        correct += 1;
                    }
                }
                Ok(correct)
            }));
        }
        let mut total = 0;
        for h in handles {
            total += h.join().expect("evaluation worker panicked")?;
        }
        Ok(total)
    })?;
    Ok(correct as f64 / dataset.len() as f64)
}

/// Generate a synthetic labeled corpus and write it as TSV.
pub fn run_synth(spec: &SynthSpec, out: &Path) -> Result<usize> {
    let records: Vec<LabeledQuestion> = generate_synth(spec)?;
    save_tsv(out, &records)?;
    Ok(records.len())
}
