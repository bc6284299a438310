//! Model checkpoints: a text manifest (run settings, vocabulary sizes, class
//! count, tensor names) followed by the tensor blobs. Parameters are written
//! as 64-bit values in build order, so saving twice from the same state
//! produces byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use convtext_core::real::Real;
use convtext_core::{Classifier, Extractor};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::tensor_io::{read_tensor, write_tensor};

const MAGIC: &str = "convtext checkpoint v1";

pub fn save_checkpoint<F: Real>(
    path: &Path,
    settings: &Settings,
    extractor: &Extractor<F>,
    head: &Classifier<F>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MAGIC}")?;
    for (key, value) in settings.echo() {
        writeln!(w, "{key} = {value}")?;
    }
    writeln!(w, "word_vocab_size = {}", extractor.config().word_vocab_size)?;
    writeln!(w, "char_vocab_size = {}", extractor.config().char_vocab_size)?;
    writeln!(w, "num_classes = {}", head.num_classes())?;
    writeln!(w, "tensors = {}", extractor.params().len() + 2)?;
    for p in extractor.params().iter() {
        writeln!(w, "name: {}", p.name)?;
        write_tensor(&mut w, &p.tensor)?;
    }
    writeln!(w, "name: head.weights")?;
    write_tensor(&mut w, head.weights())?;
    writeln!(w, "name: head.bias")?;
    write_tensor(&mut w, head.bias())?;
    w.flush()?;
    Ok(())
}

fn read_line(r: &mut impl BufRead, name: &str, line: usize) -> Result<String> {
    let mut buf = String::new();
    if r.read_line(&mut buf)? == 0 {
        return Err(Error::format(name, line, "unexpected end of file"));
    }
    Ok(buf.trim_end_matches('\n').to_string())
}

pub fn load_checkpoint<F: Real>(path: &Path) -> Result<(Settings, Extractor<F>, Classifier<F>)> {
    let name = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    let mut line_no = 1;
    if read_line(&mut r, &name, line_no)? != MAGIC {
        return Err(Error::format(&name, 1, "not a checkpoint file"));
    }
    let mut settings = Settings::default();
    let mut word_vocab_size = 0usize;
    let mut char_vocab_size = 0usize;
    let mut num_classes = 0usize;
    let tensor_count;
    loop {
        line_no += 1;
        let line = read_line(&mut r, &name, line_no)?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(&name, line_no, "expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "word_vocab_size" => word_vocab_size = value.parse().map_err(|_| {
                Error::format(&name, line_no, "bad word_vocab_size")
            })?,
            "char_vocab_size" => char_vocab_size = value.parse().map_err(|_| {
                Error::format(&name, line_no, "bad char_vocab_size")
            })?,
            "num_classes" => num_classes = value.parse().map_err(|_| {
                Error::format(&name, line_no, "bad num_classes")
            })?,
            "tensors" => {
                tensor_count = value
                    .parse::<usize>()
                    .map_err(|_| Error::format(&name, line_no, "bad tensor count"))?;
                break;
            }
            _ => settings
                .set(key, value)
                .map_err(|e| Error::format(&name, line_no, e.to_string()))?,
        }
    }
    if num_classes < 2 {
        return Err(Error::format(&name, line_no, "missing or bad num_classes"));
    }
    let config = settings.extractor_config(word_vocab_size, char_vocab_size)?;
    let mut extractor = Extractor::<F>::build(config, settings.seed)?;
    if tensor_count != extractor.params().len() + 2 {
        return Err(Error::Invalid(format!(
            "checkpoint {name} holds {tensor_count} tensors, architecture expects {}",
            extractor.params().len() + 2
        )));
    }
    let mut head = Classifier::<F>::build(extractor.output_dim(), num_classes, settings.seed);

    let load_one = |r: &mut BufReader<File>, expected: &str| -> Result<_> {
        let line = read_line(r, &name, 0)?;
        let got = line
            .strip_prefix("name: ")
            .ok_or_else(|| Error::Invalid(format!("expected tensor name line, got {line:?}")))?;
        if got != expected {
            return Err(Error::Invalid(format!(
                "checkpoint tensor {got:?} does not match architecture slot {expected:?}"
            )));
        }
        read_tensor::<F, _>(r)
    };

    let expected_names: Vec<String> =
        extractor.params().iter().map(|p| p.name.clone()).collect();
    for (i, pname) in expected_names.iter().enumerate() {
        let t = load_one(&mut r, pname)?;
        let slot = extractor.params_mut().get_mut(i);
        if t.shape() != slot.shape() {
            return Err(Error::Invalid(format!(
                "checkpoint tensor {pname:?} has shape {:?}, expected {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }
    let w = load_one(&mut r, "head.weights")?;
    let b = load_one(&mut r, "head.bias")?;
    if w.shape() != head.weights().shape() || b.shape() != head.bias().shape() {
        return Err(Error::Invalid("head tensor shapes do not match".into()));
    }
    *head.weights_mut() = w;
    *head.bias_mut() = b;
    extractor.params_mut().enforce_frozen();
    Ok((settings, extractor, head))
}

#[cfg(test)]
mod tests {
    use super::*;
    use convtext_core::Variant;

    #[test]
    fn round_trip_restores_every_tensor() {
        let mut settings = Settings::default();
        settings.variant = Variant::InceptionWord;
        settings.seed = 5;
        let config = settings.extractor_config(20, 0).unwrap();
        let extractor = Extractor::<f64>::build(config, 5).unwrap();
        let head = Classifier::<f64>::build(extractor.output_dim(), 3, 6);

        let dir = std::env::temp_dir().join("convtext-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        save_checkpoint(&path, &settings, &extractor, &head).unwrap();
        let first = std::fs::read(&path).unwrap();

        let (s2, e2, h2) = load_checkpoint::<f64>(&path).unwrap();
        assert_eq!(s2, settings);
        for (a, b) in extractor.params().iter().zip(e2.params().iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.tensor.data(), b.tensor.data());
        }
        assert_eq!(head.weights().data(), h2.weights().data());
        assert_eq!(head.bias().data(), h2.bias().data());

        // saving the reloaded model is byte-identical
        save_checkpoint(&path, &s2, &e2, &h2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = std::env::temp_dir().join("convtext-ckpt-test2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        std::fs::write(&path, format!("{MAGIC}\nvariant = fasttext-word\n")).unwrap();
        assert!(load_checkpoint::<f64>(&path).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
