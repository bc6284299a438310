//! Word and character vocabularies plus fixed-length sentence encoding.
//!
//! A vocabulary maps tokens to contiguous indices with two reserved slots:
//! `PAD = 0` (its embedding row stays zero) and `UNK = 1`. `content_size` is
//! the number of real tokens, i.e. the size the published vocabulary figures
//! refer to.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// The 18 ASCII punctuation marks of the default character set. Together with
/// the 26 lowercase letters and the space character they give 45 entries.
pub const DEFAULT_PUNCTUATION: [char; 18] = [
    '!', '"', '#', '$', '%', '&', '\'', '(', ')', ',', '-', '.', '/', ':', ';', '?', '@', '_',
];

/// Bidirectional token <-> index map over word tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocab {
    token_to_index: BTreeMap<String, usize>,
    index_to_token: Vec<String>,
}

/// Bidirectional map over single characters; same layout as [`WordVocab`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    char_to_index: BTreeMap<char, usize>,
    index_to_char: Vec<char>,
}

/// A fixed-length index sequence with its true (unpadded) length and mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub indices: Vec<usize>,
    pub true_length: usize,
    pub mask: Vec<bool>,
}

impl EncodedSentence {
    pub fn padded_length(&self) -> usize {
        self.indices.len()
    }
}

/// Lowercase and split into tokens: runs of letters/digits are words,
/// every punctuation character becomes its own token, whitespace separates.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            if !word.is_empty() {
                tokens.push(core::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

impl WordVocab {
    /// Build from a tokenized corpus; indices follow first appearance.
    pub fn build(corpus: &[Vec<String>]) -> Result<Self> {
        if corpus.iter().all(|s| s.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        let mut index_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut token_to_index = BTreeMap::new();
        for sentence in corpus {
            for token in sentence {
                if !token_to_index.contains_key(token) {
                    token_to_index.insert(token.clone(), index_to_token.len());
                    index_to_token.push(token.clone());
                }
            }
        }
        Ok(WordVocab {
            token_to_index,
            index_to_token,
        })
    }

    /// Rebuild from an ordered token list as stored on disk (including the
    /// `<pad>`/`<unk>` lines).
    pub fn from_ordered_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD_INDEX] != PAD_TOKEN || tokens[UNK_INDEX] != UNK_TOKEN {
            return Err(Error::Parse(
                "vocabulary must start with <pad> and <unk>".to_string(),
            ));
        }
        let mut token_to_index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate().skip(2) {
            if token_to_index.insert(t.clone(), i).is_some() {
                return Err(Error::Parse(alloc::format!("duplicate token {t:?}")));
            }
        }
        Ok(WordVocab {
            token_to_index,
            index_to_token: tokens,
        })
    }

    /// Number of content tokens (excludes PAD/UNK).
    pub fn content_size(&self) -> usize {
        self.index_to_token.len() - 2
    }

    /// Total number of indices including PAD/UNK; the embedding row count.
    pub fn total_size(&self) -> usize {
        self.index_to_token.len()
    }

    /// Index of a token, or `UNK_INDEX` if unseen.
    pub fn index_of(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    pub fn token_at(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }
}

impl CharVocab {
    /// Build over the 26 lowercase letters, space, and the given punctuation.
    pub fn build(punctuation: &[char]) -> Result<Self> {
        let mut index_to_char: Vec<char> = Vec::new();
        index_to_char.extend('a'..='z');
        index_to_char.push(' ');
        for &p in punctuation {
            if p.is_ascii_lowercase() || p == ' ' {
                return Err(Error::InvalidPunctuation(p));
            }
            if index_to_char.contains(&p) {
                return Err(Error::DuplicateChar(p));
            }
            index_to_char.push(p);
        }
        let mut char_to_index = BTreeMap::new();
        for (i, &c) in index_to_char.iter().enumerate() {
            char_to_index.insert(c, i + 2);
        }
        Ok(CharVocab {
            char_to_index,
            index_to_char,
        })
    }

    /// The default 45-character configuration.
    pub fn default_config() -> Self {
        CharVocab::build(&DEFAULT_PUNCTUATION).expect("default character set is valid")
    }

    pub fn content_size(&self) -> usize {
        self.index_to_char.len()
    }

    pub fn total_size(&self) -> usize {
        self.index_to_char.len() + 2
    }

    pub fn index_of(&self, c: char) -> usize {
        self.char_to_index.get(&c).copied().unwrap_or(UNK_INDEX)
    }
}

fn encode_indices(indices: &[usize], target_length: usize) -> Result<EncodedSentence> {
    if indices.is_empty() {
        return Err(Error::EmptySentence);
    }
    if target_length == 0 {
        return Err(Error::InvalidConfig("target_length must be >= 1".to_string()));
    }
    let true_length = indices.len().min(target_length);
    let mut out = vec![PAD_INDEX; target_length];
    out[..true_length].copy_from_slice(&indices[..true_length]);
    let mask = (0..target_length).map(|i| i < true_length).collect();
    Ok(EncodedSentence {
        indices: out,
        true_length,
        mask,
    })
}

/// Map tokens to indices, crop from the right, pad with `PAD`.
pub fn encode_words(
    vocab: &WordVocab,
    tokens: &[String],
    target_length: usize,
) -> Result<EncodedSentence> {
    let indices: Vec<usize> = tokens.iter().map(|t| vocab.index_of(t)).collect();
    encode_indices(&indices, target_length)
}

/// Same contract as [`encode_words`], over the characters of one string.
pub fn encode_chars(
    vocab: &CharVocab,
    word: &str,
    target_length: usize,
) -> Result<EncodedSentence> {
    let indices: Vec<usize> = word.chars().map(|c| vocab.index_of(c)).collect();
    encode_indices(&indices, target_length)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_splits_punctuation() {
        assert_eq!(tokenize("What color is it?"), toks(&["what", "color", "is", "it", "?"]));
    }

    #[test]
    fn tokenize_empty() {
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn tokenize_apostrophe_and_runs_of_spaces() {
        // derived by applying the splitting rule by hand
        assert_eq!(
            tokenize("Is   the dog's tail up?"),
            toks(&["is", "the", "dog", "'", "s", "tail", "up", "?"])
        );
    }

    #[test]
    fn word_vocab_first_appearance_order() {
        let corpus = vec![toks(&["is", "it", "red"]), toks(&["is", "it"])];
        let v = WordVocab::build(&corpus).unwrap();
        assert_eq!(v.content_size(), 3);
        assert_eq!(v.index_of("is"), 2);
        assert_eq!(v.index_of("it"), 3);
        assert_eq!(v.index_of("red"), 4);
    }

    #[test]
    fn word_vocab_single_token() {
        let v = WordVocab::build(&[toks(&["a"])]).unwrap();
        assert_eq!(v.content_size(), 1);
        assert_eq!(v.total_size(), 3);
    }

    #[test]
    fn word_vocab_empty_corpus() {
        assert_eq!(WordVocab::build(&[]), Err(Error::EmptyCorpus));
        assert_eq!(WordVocab::build(&[Vec::new()]), Err(Error::EmptyCorpus));
    }

    #[test]
    fn word_vocab_round_trip() {
        let corpus = vec![toks(&["what", "color", "is", "the", "dog", "?"])];
        let v = WordVocab::build(&corpus).unwrap();
        for t in &corpus[0] {
            assert_eq!(v.token_at(v.index_of(t)), Some(t.as_str()));
        }
    }

    #[test]
    fn char_vocab_default_has_45() {
        let v = CharVocab::default_config();
        assert_eq!(v.content_size(), 45);
        assert_eq!(v.total_size(), 47);
    }

    #[test]
    fn char_vocab_sizes() {
        assert_eq!(CharVocab::build(&[]).unwrap().content_size(), 27);
        assert_eq!(CharVocab::build(&['?', '!']).unwrap().content_size(), 29);
    }

    #[test]
    fn char_vocab_rejects_duplicates_and_letters() {
        assert_eq!(CharVocab::build(&['?', '?']), Err(Error::DuplicateChar('?')));
        assert_eq!(CharVocab::build(&['a']), Err(Error::InvalidPunctuation('a')));
        assert_eq!(CharVocab::build(&[' ']), Err(Error::InvalidPunctuation(' ')));
    }

    #[test]
    fn encode_words_pads_and_maps_unk() {
        let v = WordVocab::build(&[toks(&["is", "it", "red"])]).unwrap();
        let e = encode_words(&v, &toks(&["is", "it"]), 4).unwrap();
        assert_eq!(e.indices, vec![2, 3, 0, 0]);
        assert_eq!(e.true_length, 2);
        assert_eq!(e.mask, vec![true, true, false, false]);

        let e = encode_words(&v, &toks(&["blue"]), 2).unwrap();
        assert_eq!(e.indices, vec![UNK_INDEX, PAD_INDEX]);
    }

    #[test]
    fn encode_words_crops_from_right() {
        let v = WordVocab::build(&[toks(&["a", "b", "c", "d", "e", "f"])]).unwrap();
        let e = encode_words(&v, &toks(&["a", "b", "c", "d", "e", "f"]), 4).unwrap();
        assert_eq!(e.true_length, 4);
        assert_eq!(e.indices, vec![2, 3, 4, 5]);
    }

    #[test]
    fn encode_words_rejects_empty() {
        let v = WordVocab::build(&[toks(&["a"])]).unwrap();
        assert_eq!(encode_words(&v, &[], 4), Err(Error::EmptySentence));
    }

    #[test]
    fn encode_chars_cases() {
        let v = CharVocab::default_config();
        let e = encode_chars(&v, "cat", 5).unwrap();
        assert_eq!(e.true_length, 3);
        assert_eq!(&e.indices[3..], &[PAD_INDEX, PAD_INDEX]);
        assert!(e.indices[..3].iter().all(|&i| i >= 2));

        let e = encode_chars(&v, "?", 3).unwrap();
        assert_eq!(e.true_length, 1);

        let e = encode_chars(&v, "alligator", 6).unwrap();
        assert_eq!(e.true_length, 6);
        assert_eq!(e.padded_length(), 6);
    }

    #[test]
    fn mask_sum_matches_min_rule() {
        let v = WordVocab::build(&[toks(&["a", "b", "c"])]).unwrap();
        for len in 1..6 {
            for target in 1..6 {
                let tokens: Vec<String> = (0..len).map(|i| ["a", "b", "c"][i % 3].to_string()).collect();
                let e = encode_words(&v, &tokens, target).unwrap();
                let mask_sum = e.mask.iter().filter(|&&m| m).count();
                assert_eq!(mask_sum, len.min(target));
            }
        }
    }
}
