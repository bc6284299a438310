use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use convtext::commands;
use convtext::config::Settings;
use convtext::error::{Error, Result};
use convtext::metrics::sig9;
use convtext_core::real::Real;
use convtext_core::synth::SynthSpec;

/// Convolutional text representation models: train, evaluate and inspect.
#[derive(Parser)]
#[command(name = "convtext", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings flags shared by model-building subcommands. Precedence:
/// flags > config file > built-in defaults.
#[derive(Args)]
struct SettingsFlags {
    /// Flat `key = value` settings file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model variant, e.g. inception-gate
    #[arg(long)]
    variant: Option<String>,
    /// Root random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Minibatch size
    #[arg(long)]
    batch_size: Option<usize>,
}

impl SettingsFlags {
    fn resolve(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        if let Some(v) = &self.variant {
            s.set("variant", v)?;
        }
        if let Some(v) = self.seed {
            s.set("seed", &v.to_string())?;
        }
        if let Some(v) = self.epochs {
            s.set("epochs", &v.to_string())?;
        }
        if let Some(v) = self.lr {
            s.set("lr", &v.to_string())?;
        }
        if let Some(v) = self.batch_size {
            s.set("batch_size", &v.to_string())?;
        }
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a word vocabulary from a labeled TSV corpus
    BuildVocab {
        /// Input corpus, `label<TAB>text` per line
        #[arg(long)]
        data: PathBuf,
        /// Output vocabulary file, one token per line
        #[arg(long)]
        out: PathBuf,
    },
    /// Report exact model parameter counts
    Params {
        #[command(flatten)]
        settings: SettingsFlags,
        /// Check all published per-model figures and report MATCH/MISMATCH
        #[arg(long)]
        all_table3: bool,
    },
    /// Compare analytic gradients against central finite differences
    GradCheck {
        #[command(flatten)]
        settings: SettingsFlags,
        /// Flip the analytic gradient's sign to prove the check can fail
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Train a model on a labeled TSV corpus
    Train {
        #[command(flatten)]
        settings: SettingsFlags,
        /// Input corpus, `label<TAB>text` per line
        #[arg(long)]
        data: PathBuf,
        /// Existing vocabulary file (default: built from the training split)
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Output directory for metrics.tsv, model.ckpt and vocab.txt
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a labeled TSV corpus
    Eval {
        /// Checkpoint written by `train`
        #[arg(long)]
        checkpoint: PathBuf,
        /// Vocabulary file used at training time
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Input corpus, `label<TAB>text` per line
        #[arg(long)]
        data: PathBuf,
        /// Worker threads for evaluation (training is always single-threaded)
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Generate a synthetic labeled corpus
    Synth {
        /// Generator seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of questions
        #[arg(long, default_value_t = 600)]
        size: usize,
        /// Number of classes (2..=6)
        #[arg(long, default_value_t = 6)]
        num_classes: usize,
        /// Make confusable pairs that differ only in word order
        #[arg(long)]
        order_sensitive: bool,
        /// Output TSV file
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy)]
enum Precision {
    F32,
    F64,
}

fn precision() -> Result<Precision> {
    match std::env::var("CONVTEXT_PRECISION") {
        Err(_) => Ok(Precision::F64),
        Ok(v) => match v.as_str() {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::Invalid(format!(
                "CONVTEXT_PRECISION must be f32 or f64, got {other:?}"
            ))),
        },
    }
}

fn grad_check_cmd<F: Real>(settings: &Settings, corrupt: bool) -> Result<bool> {
    let report = commands::run_grad_check::<F>(settings, corrupt)?;
    for g in &report.groups {
        println!("{}\t{:.3e}", g.name, g.max_rel_error);
    }
    println!(
        "{}\tmax_rel_error {:.3e}\t{}",
        settings.variant.name(),
        report.max_rel_error,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(report.pass)
}

fn train_cmd<F: Real>(
    settings: &Settings,
    data: &PathBuf,
    vocab: Option<&PathBuf>,
    out: &PathBuf,
) -> Result<()> {
    let outcome = commands::run_train::<F>(settings, data, vocab.map(|p| p.as_path()), out)?;
    println!("train_acc\t{}", sig9(outcome.final_train_acc));
    if let Some(v) = outcome.final_val_acc {
        println!("val_acc\t{}", sig9(v));
    }
    println!("metrics\t{}", outcome.metrics_path.display());
    println!("checkpoint\t{}", outcome.checkpoint_path.display());
    Ok(())
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let precision = precision()?;
    match cli.command {
        Command::BuildVocab { data, out } => {
            let size = commands::build_vocab(&data, &out)?;
            println!("vocabulary\t{}\t{size} tokens", out.display());
            Ok(true)
        }
        Command::Params { settings, all_table3 } => {
            let settings = settings.resolve()?;
            let (text, all_match) = commands::params_report(&settings, all_table3);
            print!("{text}");
            Ok(all_match)
        }
        Command::GradCheck { settings, corrupt } => {
            let settings = settings.resolve()?;
            match precision {
                Precision::F32 => grad_check_cmd::<f32>(&settings, corrupt),
                Precision::F64 => grad_check_cmd::<f64>(&settings, corrupt),
            }
        }
        Command::Train {
            settings,
            data,
            vocab,
            out,
        } => {
            let settings = settings.resolve()?;
            match precision {
                Precision::F32 => train_cmd::<f32>(&settings, &data, vocab.as_ref(), &out)?,
                Precision::F64 => train_cmd::<f64>(&settings, &data, vocab.as_ref(), &out)?,
            }
            Ok(true)
        }
        Command::Eval {
            checkpoint,
            vocab,
            data,
            threads,
        } => {
            let acc = match precision {
                Precision::F32 => commands::run_eval::<f32>(
                    &checkpoint,
                    vocab.as_deref(),
                    &data,
                    threads,
                )?,
                Precision::F64 => commands::run_eval::<f64>(
                    &checkpoint,
                    vocab.as_deref(),
                    &data,
                    threads,
                )?,
            };
            println!("accuracy\t{}", sig9(acc));
            Ok(true)
        }
        Command::Synth {
            seed,
            size,
            num_classes,
            order_sensitive,
            out,
        } => {
            let spec = SynthSpec {
                seed,
                size,
                num_classes,
                order_sensitive,
            };
            let n = commands::run_synth(&spec, &out)?;
            println!("synth\t{}\t{n} questions", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
