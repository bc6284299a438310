//! Labeled-question corpora on disk: TSV with `label<TAB>question text`,
//! one record per line. Malformed lines are reported with their 1-based
//! line number.

use std::fs;
use std::path::Path;

use convtext_core::data::LabeledQuestion;

use crate::error::{Error, Result};

pub fn load_tsv(path: &Path) -> Result<Vec<LabeledQuestion>> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (label, question) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(&name, i + 1, "expected label<TAB>text"))?;
        let label: usize = label
            .parse()
            .map_err(|_| Error::format(&name, i + 1, format!("non-integer label {label:?}")))?;
        if question.trim().is_empty() {
            return Err(Error::format(&name, i + 1, "empty question text"));
        }
        records.push(LabeledQuestion::new(question.to_string(), label));
    }
    if records.is_empty() {
        return Err(Error::format(&name, 1, "no records in file"));
    }
    Ok(records)
}

pub fn save_tsv(path: &Path, records: &[LabeledQuestion]) -> Result<()> {
    let mut out = String::new();
    for q in records {
        out.push_str(&format!("{}\t{}\n", q.label, q.text));
    }
    fs::write(path, out)?;
    Ok(())
}
