//! Vocabulary files: UTF-8 text, one token per line, line number = index.
//! Line 0 must be `<pad>` and line 1 `<unk>`.

use std::fs;
use std::path::Path;

use convtext_core::vocab::{PAD_TOKEN, UNK_TOKEN};
use convtext_core::WordVocab;

use crate::error::{Error, Result};

pub fn save_word_vocab(path: &Path, vocab: &WordVocab) -> Result<()> {
    let mut out = String::new();
    for token in vocab.tokens() {
        out.push_str(token);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_word_vocab(path: &Path) -> Result<WordVocab> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let tokens: Vec<String> = text.lines().map(str::to_string).collect();
    if tokens.len() < 2 {
        return Err(Error::format(&name, 1, "vocabulary needs at least the two reserved lines"));
    }
    if tokens[0] != PAD_TOKEN {
        return Err(Error::format(&name, 1, format!("line 0 must be {PAD_TOKEN}")));
    }
    if tokens[1] != UNK_TOKEN {
        return Err(Error::format(&name, 2, format!("line 1 must be {UNK_TOKEN}")));
    }
    WordVocab::from_ordered_tokens(tokens).map_err(Error::Core)
}
