//! Run settings with three-level precedence: built-in defaults, then a flat
//! `key = value` config file, then command-line flags. The effective values
//! are echoed into every metrics log header.

use std::fs;
use std::path::Path;

use convtext_core::train::{OptimizerKind, TrainConfig};
use convtext_core::{ExtractorConfig, Variant};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub variant: Variant,
    pub embed_dim: usize,
    pub char_embed_dim: usize,
    pub inception: String,
    pub charcnn_inception: String,
    pub charcnn_out: usize,
    pub deep_channels: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub optimizer: String,
    pub seed: u64,
    pub split: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            variant: Variant::InceptionWord,
            embed_dim: 64,
            char_embed_dim: 16,
            inception: "2(64)+3(64)".to_string(),
            charcnn_inception: "2(16)+3(16)".to_string(),
            charcnn_out: 16,
            deep_channels: 32,
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 32,
            dropout: 0.5,
            optimizer: "adam".to_string(),
            seed: 0,
            split: 0.8,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("bad value {value:?} for key {key}")))
}

impl Settings {
    /// Apply one `key = value` pair; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "variant" => self.variant = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "char_embed_dim" => self.char_embed_dim = parse(key, value)?,
            "inception.branches" => self.inception = value.to_string(),
            "charcnn.branches" => self.charcnn_inception = value.to_string(),
            "charcnn.out" => self.charcnn_out = parse(key, value)?,
            "deep_channels" => self.deep_channels = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "optimizer" => match value {
                "adam" | "sgd" => self.optimizer = value.to_string(),
                _ => return Err(Error::Invalid(format!("unknown optimizer {value:?}"))),
            },
            "seed" => self.seed = parse(key, value)?,
            "split" => self.split = parse(key, value)?,
            _ => return Err(Error::Invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Overlay a config file onto the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(&name, i + 1, "expected key = value"))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::format(&name, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    /// Fixed-order `key = value` lines for the metrics log header.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("variant".into(), self.variant.name().into()),
            ("embed_dim".into(), self.embed_dim.to_string()),
            ("char_embed_dim".into(), self.char_embed_dim.to_string()),
            ("inception.branches".into(), self.inception.clone()),
            ("charcnn.branches".into(), self.charcnn_inception.clone()),
            ("charcnn.out".into(), self.charcnn_out.to_string()),
            ("deep_channels".into(), self.deep_channels.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("lr".into(), format!("{}", self.learning_rate)),
            ("batch_size".into(), self.batch_size.to_string()),
            ("dropout".into(), format!("{}", self.dropout)),
            ("optimizer".into(), self.optimizer.clone()),
            ("seed".into(), self.seed.to_string()),
            ("split".into(), format!("{}", self.split)),
        ]
    }

    pub fn extractor_config(
        &self,
        word_vocab_size: usize,
        char_vocab_size: usize,
    ) -> Result<ExtractorConfig> {
        let config = ExtractorConfig {
            variant: self.variant,
            embed_dim: self.embed_dim,
            char_embed_dim: self.char_embed_dim,
            inception: self
                .inception
                .parse()
                .map_err(|e: convtext_core::Error| Error::Invalid(e.to_string()))?,
            charcnn_inception: self
                .charcnn_inception
                .parse()
                .map_err(|e: convtext_core::Error| Error::Invalid(e.to_string()))?,
            charcnn_out: self.charcnn_out,
            deep_channels: self.deep_channels,
            word_vocab_size,
            char_vocab_size,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let optimizer = match self.optimizer.as_str() {
            "sgd" => OptimizerKind::Sgd,
            _ => OptimizerKind::adam_default(),
        };
        let config = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            dropout_rate: self.dropout,
            seed: self.seed,
            optimizer,
        };
        config.validate()?;
        Ok(config)
    }
}
