//! Metrics logs: `#`-prefixed header lines echoing the effective settings,
//! one column-header line, then one TSV row per epoch. All numbers carry
//! nine significant digits so reruns can be compared byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use convtext_core::train::EpochMetrics;

use crate::config::Settings;
use crate::error::Result;

/// Nine significant digits, locale-independent.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path, settings: &Settings) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        for (key, value) in settings.echo() {
            writeln!(out, "# {key} = {value}")?;
        }
        writeln!(out, "epoch\tloss\ttrain_acc\tval_acc")?;
        Ok(MetricsWriter { out })
    }

    pub fn epoch(&mut self, epoch: usize, m: &EpochMetrics) -> Result<()> {
        let val = m.val_acc.map_or_else(|| "-".to_string(), sig9);
        writeln!(
            self.out,
            "{epoch}\t{}\t{}\t{val}",
            sig9(m.loss),
            sig9(m.train_acc)
        )?;
        self.out.flush()?;
        Ok(())
    }
}
